#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "model.hpp"
#include "quadrature.hpp"
#include "geometry.hpp"
#include "association.hpp"
#include "analytic.hpp"
#include "montecarlo.hpp"
#include "config.hpp"
#include "sweep.hpp"
