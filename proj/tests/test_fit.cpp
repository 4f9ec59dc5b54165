#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "spinem/errors.hpp"
#include "spinem/fit.hpp"

using namespace spinem;

namespace {

struct Truth {
    Eigen::Vector3d offset;  // in u = (x − mid) / half
    double center;
    double width;
    double amplitude;
    double dispersion;
};

std::vector<double> grid(int n, double lo, double hi) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1.0);
    return x;
}

std::vector<double> synth(const std::vector<double>& x, const Truth& t, Channel ch, LineProfile prof,
                          double noise, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, noise);
    const double mid = 0.5 * (x.front() + x.back());
    const double half = 0.5 * (x.back() - x.front());
    std::vector<double> y;
    for (double xi : x) {
        const double u = (xi - mid) / half;
        const double s = (xi - t.center) / t.width;
        double v = t.offset[0] + t.offset[1] * u + t.offset[2] * u * u;
        if (ch != Channel::dispersion) v += t.amplitude * absorption_shape(prof, s);
        if (ch != Channel::absorption) v += t.dispersion * dispersion_shape(prof, s);
        y.push_back(v + n(gen));
    }
    return y;
}

// Fraction of 100 seeded fits with every listed parameter inside 3σ.
void monte_carlo(Channel ch, LineProfile prof) {
    const std::vector<double> x = grid(97, 174.04e-3, 175.24e-3);
    const Truth t{{-1.5e-3, 2.0e-4, 6.0e-4}, 174.66e-3, 55e-6, -4.5e-4, ch == Channel::absorption ? 0.0 : 2.0e-4};
    const double noise = 2.0e-5;
    int inside = 0;
    std::vector<double> pulls;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const std::vector<double> y = synth(x, t, ch, prof, noise, seed);
        FitOptions opt;
        opt.channel = ch;
        opt.profile = prof;
        const FitReport r = fit_line(x, y, opt);
        std::vector<std::pair<double, double>> pairs = {
            {(r.offset[0] - t.offset[0]) , r.offset_sigma[0]},
            {(r.offset[1] - t.offset[1]) , r.offset_sigma[1]},
            {(r.offset[2] - t.offset[2]) , r.offset_sigma[2]},
            {(r.center - t.center) , r.center_sigma},
            {(r.width - t.width) , r.width_sigma},
        };
        if (ch != Channel::dispersion) pairs.push_back({r.amplitude - t.amplitude, r.amplitude_sigma});
        if (ch != Channel::absorption) pairs.push_back({r.dispersion_amplitude - t.dispersion, r.dispersion_amplitude_sigma});
        bool ok = true;
        for (const auto& [err, sigma] : pairs) {
            REQUIRE(sigma > 0.0);
            const double pull = err / sigma;
            pulls.push_back(pull);
            CHECK(std::abs(pull) < 5.0);
            ok = ok && std::abs(pull) < 3.0;
        }
        inside += ok ? 1 : 0;
        CHECK(r.residual_std == doctest::Approx(noise).epsilon(0.25));
    }
    // With 5–7 parameters the chance that all sit inside 3σ is about 98%.
    CHECK(inside >= 90);
    double sum2 = 0.0;
    for (double p : pulls) sum2 += p * p;
    const double rms = std::sqrt(sum2 / static_cast<double>(pulls.size()));
    CHECK(rms > 0.8);
    CHECK(rms < 1.2);
}

}  // namespace

TEST_CASE("line shapes") {
    for (LineProfile p : {LineProfile::gaussian, LineProfile::lorentzian}) {
        CHECK(absorption_shape(p, 0.0) == 1.0);
        CHECK(dispersion_shape(p, 0.0) == 0.0);
        const double half = 0.5 * fwhm_per_width(p);
        CHECK(absorption_shape(p, half) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(absorption_shape(p, -1.3) == absorption_shape(p, 1.3));
        CHECK(dispersion_shape(p, -1.3) == -dispersion_shape(p, 1.3));
    }
    CHECK(dispersion_shape(LineProfile::gaussian, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dispersion_shape(LineProfile::lorentzian, 1.0 / std::sqrt(3.0)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Monte Carlo recovery: Gaussian absorption") { monte_carlo(Channel::absorption, LineProfile::gaussian); }
TEST_CASE("Monte Carlo recovery: Gaussian dispersion") { monte_carlo(Channel::dispersion, LineProfile::gaussian); }
TEST_CASE("Monte Carlo recovery: Lorentzian combined") { monte_carlo(Channel::combined, LineProfile::lorentzian); }

TEST_CASE("noiseless fit is exact") {
    const std::vector<double> x = grid(61, -3.0, 3.0);
    const Truth t{{0.1, -0.2, 0.05}, 0.3, 0.4, 1.7, 0.0};
    const std::vector<double> y = synth(x, t, Channel::absorption, LineProfile::gaussian, 0.0, 1);
    const FitReport r = fit_line(x, y);
    CHECK(r.center == doctest::Approx(t.center).epsilon(1e-8));
    CHECK(r.width == doctest::Approx(t.width).epsilon(1e-8));
    CHECK(r.amplitude == doctest::Approx(t.amplitude).epsilon(1e-8));
    CHECK(r.fwhm == doctest::Approx(2.3548200450309493 * t.width).epsilon(1e-8));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(r.model_at(x[i]) == doctest::Approx(y[i]).epsilon(1e-8));
}

TEST_CASE("non-convergence carries the last iterate") {
    const std::vector<double> x = grid(61, -3.0, 3.0);
    const Truth t{{0.1, -0.2, 0.05}, 0.3, 0.4, 1.7, 0.0};
    const std::vector<double> y = synth(x, t, Channel::absorption, LineProfile::gaussian, 0.01, 3);
    FitOptions opt;
    opt.max_iterations = 1;
    opt.initial_center = -2.0;
    try {
        fit_line(x, y, opt);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(e.last_params().size() == 6);
        CHECK(e.iterations() == 1);
    }
}

TEST_CASE("fit input validation") {
    const std::vector<double> x = grid(8, 0.0, 1.0);
    CHECK_THROWS_AS(fit_line(x, x), ConfigError);
    const std::vector<double> a = grid(20, 0.0, 1.0);
    const std::vector<double> b = grid(19, 0.0, 1.0);
    CHECK_THROWS_AS(fit_line(a, b), ConfigError);
}

TEST_CASE("gyromagnetic fit") {
    std::vector<GyromagneticPoint> pts;
    for (double b : {0.170, 0.1725, 0.175, 0.1775, 0.180}) pts.push_back({b, 28.0e9 * b, 0.0});
    const GyromagneticFit f = gyromagnetic_fit(pts);
    CHECK(f.gamma == doctest::Approx(28.0e9).epsilon(1e-12));
    CHECK(std::abs(f.intercept) < 1e-3);
    CHECK(f.residual_rms < 1e-3);

    for (auto& p : pts) p.sigma = 1e6;
    const GyromagneticFit w = gyromagnetic_fit(pts);
    CHECK(w.gamma == doctest::Approx(28.0e9).epsilon(1e-12));
    CHECK(w.gamma_sigma == doctest::Approx(1e6 / std::sqrt(5 * 1.25e-5)).epsilon(1e-9));

    const std::vector<GyromagneticPoint> dup = {{0.17, 4.76e9, 0.0}, {0.17, 4.77e9, 0.0}, {0.17, 4.78e9, 0.0}};
    CHECK_THROWS_AS(gyromagnetic_fit(dup), NumericError);
}
