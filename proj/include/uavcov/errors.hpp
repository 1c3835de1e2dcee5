#pragma once

#include <stdexcept>
#include <string>

namespace uavcov {

/// A parameter violates its documented domain (non-finite dB value, bad band ordering, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Zero transmitter/receiver separation, or a UAV at or below GBS height.
class InvalidGeometry : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Horizontal distance beyond the UAV main-lobe footprint (antenna gain is zero there).
class OutOfBeam : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Conditioning on an event of probability zero (e.g. serving-distance PDF when A = 0).
class UndefinedConditional : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Rejection sampler accepted too few fields to be usable.
class ConditioningInfeasible : public std::runtime_error {
public:
    ConditioningInfeasible(const std::string& what, double rate)
        : std::runtime_error(what), acceptance_rate(rate) {}
    double acceptance_rate;
};

/// Adaptive quadrature hit its subdivision cap before reaching tolerance.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double estimate, double error)
        : std::runtime_error(what), best_estimate(estimate), error_bound(error) {}
    double best_estimate;
    double error_bound;
};

}  // namespace uavcov
