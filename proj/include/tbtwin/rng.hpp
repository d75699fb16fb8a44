#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace tbtwin {

// Keyed counter-based random streams. Every (seed, chunk, stream) triple
// yields an independent sequence, so chunked simulations produce identical
// results for any worker count.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// splitmix64 sequence over a key derived from up to three labels.
class Stream {
  public:
    explicit Stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
        : state_(mix64(mix64(mix64(seed) ^ mix64(a ^ 0xD1B54A32D192ED03ull)) ^
                       mix64(b ^ 0x8CB92BA72F3D8DD7ull))) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53-bit resolution
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1], safe as log() argument
    double next_unit_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double next_exponential() { return -std::log(next_unit_pos()); }

    bool next_bernoulli(double p) { return next_unit() < p; }

    double next_gaussian() { return inverse_normal_cdf(next_unit_pos()); }

    double next_laplace(double scale) {
        const double e = next_exponential();
        return next_bernoulli(0.5) ? scale * e : -scale * e;
    }

    std::uint64_t next_below(std::uint64_t n) {
        // multiply-shift; bias < 2^-64, irrelevant at simulation scale
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    long long next_poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) return poisson_knuth(lambda);
        return poisson_ptrd(lambda);
    }

    // Wichura AS241 (PPND16), |error| < 1e-15 over (0,1)
    static double inverse_normal_cdf(double p) {
        const double q = p - 0.5;
        if (std::fabs(q) <= 0.425) {
            const double r = 0.180625 - q * q;
            return q *
                   (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                         6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                       1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                     1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
                   (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                         3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                       5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                     4.2313330701600911252e1) * r + 1.0);
        }
        double r = q < 0.0 ? p : 1.0 - p;
        r = std::sqrt(-std::log(r));
        double value;
        if (r <= 5.0) {
            r -= 1.6;
            value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                          2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                        3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                      4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                    (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                          1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                        6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                      2.05319162663775882187e0) * r + 1.0);
        } else {
            r -= 5.0;
            value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                          1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                        2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                      5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                    (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                          1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                        1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                      5.99832206555887937690e-1) * r + 1.0);
        }
        return q < 0.0 ? -value : value;
    }

  private:
    long long poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        long long k = 0;
        double prod = next_unit();
        while (prod > limit) {
            ++k;
            prod *= next_unit();
        }
        return k;
    }

    // Hormann's PTRD transformed rejection, valid for lambda >= 10
    long long poisson_ptrd(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = next_unit() - 0.5;
            double v = next_unit();
            double us = 0.5 - std::fabs(u);
            double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<long long>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * loglam - lambda - std::lgamma(k + 1.0)) {
                return static_cast<long long>(k);
            }
        }
    }

    std::uint64_t state_;
};

} // namespace rng
} // namespace tbtwin
