#ifndef VOLTERRA_VOLTERRA_HPP
#define VOLTERRA_VOLTERRA_HPP

#include "timebase.hpp"
#include "convexsets.hpp"
#include "kernels.hpp"
#include "fields.hpp"
#include "operators.hpp"
#include "solvers.hpp"
#include "funnel.hpp"
#include "catalog.hpp"

#endif  // VOLTERRA_VOLTERRA_HPP
