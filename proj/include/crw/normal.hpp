#pragma once

namespace crw {

// Standard normal helpers. "Upper" quantities use the survival function
// Phi_bar(x) = 1 - Phi(x), computed without cancellation.

double norm_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);

double log_norm_pdf(double x);

/// Upper-tail quantile z_q with norm_sf(z_q) = q. q is clamped to [0, 1];
/// q = 0 gives +inf and q = 1 gives -inf.
double norm_isf(double q);

/// Lower-tail quantile, norm_cdf(norm_ppf(p)) = p.
double norm_ppf(double p);

} // namespace crw
