#pragma once

#include <functional>

#include "depthgen/params.hpp"

namespace depthgen {

/// Compares the analytic gradient of fn() against central finite
/// differences for every entry of every param in the store. Returns the
/// max over entries of |analytic - fd| / max(1e-8, |analytic| + |fd|).
/// fn must rebuild its graph from the store's leaves on each call.
double grad_check(const std::function<Var()>& fn, ParamStore& params, double h);

}  // namespace depthgen
