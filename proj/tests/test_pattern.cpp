#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "spinem/analysis.hpp"
#include "spinem/errors.hpp"
#include "spinem/pattern.hpp"

using namespace spinem;

TEST_CASE("angle to pixel") {
    CameraModel cam;
    cam.pixel_pitch = 6.4e-6;
    cam.width_px = 4096;
    cam.height_px = 4096;
    const PixelPosition end = angle_to_pixel(cam, 16.65e-6, 0.0);
    CHECK(end.u - cam.center_u() == doctest::Approx(1561.0).epsilon(1e-3));
    CHECK(end.on_detector);
    const PixelPosition shift = angle_to_pixel(cam, 0.0, 7.5e-9);
    CHECK(shift.v - cam.center_v() == doctest::Approx(0.70).epsilon(0.01));
    const PixelPosition zero = angle_to_pixel(cam, 0.0, 0.0);
    CHECK(zero.u == cam.center_u());
    CHECK(zero.v == cam.center_v());
    const PixelPosition off = angle_to_pixel(cam, 30e-6, 0.0);
    CHECK_FALSE(off.on_detector);
}

TEST_CASE("drive-only pattern is a symmetric arcsine line") {
    const CameraModel cam;
    const DetectorImage img = render_pattern(fixture::drive_only(), cam, BeamSpot{});
    const ImageD& px = img.pixels;

    // flux
    CHECK(px.sum() == doctest::Approx(electrons_per_exposure(cam)).epsilon(1e-9));
    CHECK(img.meta.clipped_fraction < 1e-12);
    CHECK((px >= 0.0).all());

    // mirror symmetry in u and v
    const double peak = px.maxCoeff();
    CHECK((px - px.rowwise().reverse()).abs().maxCoeff() < 1e-9 * peak);
    CHECK((px - px.colwise().reverse()).abs().maxCoeff() < 1e-9 * peak);

    // line along u through the center rows, denser at the turning points
    const Eigen::ArrayXd profile = px.colwise().sum().transpose();
    const double end_px = 16.97e-6 / cam.pixel_angle();
    const int center = cam.width_px / 2;
    const int near_end = static_cast<int>(std::lround(cam.center_u() + end_px - 4.0));
    CHECK(profile(near_end) > 3.0 * profile(center));
    const Eigen::ArrayXd rows = px.rowwise().sum();
    CHECK(rows.segment(236, 40).sum() > 0.99 * px.sum());

    const Eigen::Vector2d com = weighted_com(px);
    CHECK(std::abs(com.x() - cam.center_u()) < 0.01);
    CHECK(std::abs(com.y() - cam.center_v()) < 0.01);
}

TEST_CASE("flux is conserved for a tilted pattern") {
    const CameraModel cam;
    const DetectorImage img = render_pattern(fixture::scene(fixture::probe(0.0, 160e-6), 0.0), cam, BeamSpot{});
    CHECK(img.pixels.sum() == doctest::Approx(electrons_per_exposure(cam)).epsilon(1e-9));
}

TEST_CASE("phase count convergence") {
    const CameraModel cam;
    const PatternScene sc = fixture::scene(fixture::probe(0.0, 160e-6), 0.0);
    RenderOptions a;
    a.n_phases = 4096;
    RenderOptions b;
    b.n_phases = 8192;
    const double ta = pca_tilt(render_pattern(sc, cam, BeamSpot{}, a).pixels);
    const double tb = pca_tilt(render_pattern(sc, cam, BeamSpot{}, b).pixels);
    CHECK(std::abs(ta - tb) * 180 / kPi < 1e-4);
    CHECK_THROWS_AS(render_pattern(sc, cam, BeamSpot{}, RenderOptions{100, {}, {}}), ConfigError);
}

TEST_CASE("noiseless PCA tilt matches the closed form") {
    const CameraModel cam;
    for (const ProbePosition& p : {fixture::probe(0.0, 160e-6), fixture::probe(160e-6, 0.0)}) {
        const PatternScene sc = fixture::scene(p, 0.0);
        const double closed = pattern_tilt_closed(sc.probe, sc.state, sc.alpha_max, sc.prefactor);
        const double tilt = pca_tilt(render_pattern(sc, cam, BeamSpot{}).pixels);
        CHECK(tilt == doctest::Approx(closed).epsilon(0.02));
    }
}

TEST_CASE("shot noise is Poisson") {
    CameraModel cam;
    cam.beam_current = 5e-12;
    const PatternScene sc = fixture::scene(fixture::probe(0.0, 160e-6), 0.0);
    const ImageD mean = render_pattern(sc, cam, BeamSpot{}).pixels;
    const auto mask = mean > 20.0;
    const double n = static_cast<double>(mask.count());
    REQUIRE(n > 1000);
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        RenderOptions opt;
        opt.noise_seed = seed;
        const DetectorImage noisy = render_pattern(sc, cam, BeamSpot{}, opt);
        CHECK(noisy.meta.seed == seed);
        CHECK((noisy.pixels == noisy.pixels.round()).all());
        const double chi2 = mask.select((noisy.pixels - mean).square() / mean, 0.0).sum() / n;
        CHECK(std::abs(chi2 - 1.0) < 6.0 * std::sqrt(2.0 / n));
        total += chi2;
    }
    CHECK(std::abs(total / 100 - 1.0) < 5.0 * std::sqrt(2.0 / (100 * n)));
}

TEST_CASE("noise is reproducible per seed") {
    CameraModel cam;
    const PatternScene sc = fixture::scene(fixture::probe(0.0, 160e-6), 0.0);
    RenderOptions opt;
    opt.noise_seed = 42;
    const ImageD a = render_pattern(sc, cam, BeamSpot{}, opt).pixels;
    const ImageD b = render_pattern(sc, cam, BeamSpot{}, opt).pixels;
    CHECK((a == b).all());
    opt.noise_seed = 43;
    CHECK_FALSE((render_pattern(sc, cam, BeamSpot{}, opt).pixels == a).all());
}

TEST_CASE("difference image") {
    const CameraModel cam;
    const DetectorImage a = render_pattern(fixture::drive_only(), cam, BeamSpot{});
    CHECK((difference_image(a, a) == 0.0).all());

    CameraModel small = cam;
    small.width_px = 256;
    small.height_px = 256;
    small.pixel_pitch = 102.4e-6;
    const DetectorImage b = render_pattern(fixture::drive_only(), small, BeamSpot{});
    CHECK_THROWS_AS(difference_image(a, b), DomainError);
}

TEST_CASE("resonant difference has lobes of both signs") {
    const CameraModel cam;
    const DetectorImage on = render_pattern(fixture::scene(fixture::probe(0.0, 160e-6), 0.0), cam, BeamSpot{});
    const DetectorImage off = render_pattern(fixture::scene(fixture::probe(0.0, 160e-6), 5e-3), cam, BeamSpot{});
    const ImageD diff = difference_image(on, off);
    CHECK(std::abs(diff.sum()) < 1e-6 * on.pixels.sum());
    CHECK(diff.maxCoeff() > 0.0);
    CHECK(diff.minCoeff() < 0.0);
    // tilt lobes: the upper-right and lower-left quadrants carry the opposite
    // sign to the other two
    const Eigen::Index h = diff.rows() / 2;
    const Eigen::Index w = diff.cols() / 2;
    const double q = diff.topLeftCorner(h, w).sum() + diff.bottomRightCorner(h, w).sum();
    const double p = diff.topRightCorner(h, w).sum() + diff.bottomLeftCorner(h, w).sum();
    CHECK(q * p < 0.0);
}

TEST_CASE("detuned patterns expand and compress") {
    const CameraModel cam;
    const ProbePosition p = fixture::probe(150e-6, 0.0);
    const auto length = [&](double detuning) {
        const ImageD px = render_pattern(fixture::scene(p, detuning), cam, BeamSpot{}).pixels;
        return pattern_length(px, pca_tilt(px));
    };
    const double reference = length(5e-3);
    CHECK(length(-140e-6) > reference);
    CHECK(length(140e-6) < reference);
}

TEST_CASE("pattern off the detector is rejected") {
    CameraModel cam;
    cam.camera_length = 3000.0;
    CHECK_THROWS_AS(render_pattern(fixture::drive_only(), cam, BeamSpot{}), DomainError);
}
