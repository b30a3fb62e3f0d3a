#ifndef FRACLAP_FRACLAP_HPP
#define FRACLAP_FRACLAP_HPP

// Umbrella header for the numerical library (report.hpp is separate: it needs nlohmann/json).

#include "fraclap/errors.hpp"
#include "fraclap/specfun.hpp"
#include "fraclap/quadrature.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/order.hpp"
#include "fraclap/spectral.hpp"
#include "fraclap/restricted.hpp"
#include "fraclap/extension.hpp"
#include "fraclap/harness.hpp"

#endif  // FRACLAP_FRACLAP_HPP
