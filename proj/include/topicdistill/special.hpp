// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace topicdistill {

/// Digamma function psi(x) = d/dx log Gamma(x) for x > 0.
/// Relative error below 1e-10 for x >= 1e-3. Throws DomainError for x <= 0
/// and for NaN.
double digamma(double x);

}  // namespace topicdistill
