#pragma once

#include "escape/psd.hpp"

namespace escape {

/// Perturbed gradient descent in the style of Jin et al. With shared (r, T):
/// when |grad f| <= eps and no perturbation happened in the last T steps, add
/// a ball perturbation of radius r; if the T steps after a perturbation fail to
/// decrease f by eps^2 / (128 ell), stop and return the pre-perturbation point.
/// No Hessian information is used.
RunTrace run_pgd(const Problem& p, const PsdConfig& cfg, const Vector& x0, Rng& rng,
                 const RunHooks& hooks = {});

}  // namespace escape
