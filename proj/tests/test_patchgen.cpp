#include "fractalsea/blend.hpp"
#include "fractalsea/embedding.hpp"
#include "fractalsea/error.hpp"
#include "fractalsea/eval.hpp"
#include "fractalsea/patchgen.hpp"
#include "fractalsea/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

using namespace fractalsea;

namespace {

double mean_hue(const RgbdPatch &p) {
    double r = 0, g = 0, b = 0;
    const double n = static_cast<double>(p.pixel_count());
    for (std::size_t i = 0; i < p.pixel_count(); ++i) {
        r += p.plane(0)[i] / n;
        g += p.plane(1)[i] / n;
        b += p.plane(2)[i] / n;
    }
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    if (mx == mn) return 0.0;
    double h;
    if (mx == r)
        h = std::fmod((g - b) / (mx - mn), 6.0);
    else if (mx == g)
        h = (b - r) / (mx - mn) + 2.0;
    else
        h = (r - g) / (mx - mn) + 4.0;
    return 60.0 * (h < 0 ? h + 6.0 : h);
}

PixelMask random_mask(std::mt19937_64 &gen, int w, int h) {
    std::uniform_int_distribution<int> kind(0, 2), cx(0, w - 1), cy(0, h - 1);
    PixelMask m(w, h, true);
    const int k = kind(gen);
    if (k == 0) { // random rectangle unknown
        const int x0 = cx(gen), y0 = cy(gen), x1 = cx(gen), y1 = cy(gen);
        for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
            for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) m.set(x, y, false);
    } else if (k == 1) { // random scatter
        std::bernoulli_distribution b(0.6);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) m.set(x, y, !b(gen));
    } else { // known strip on one side
        const int s = 1 + cx(gen) % (w / 2);
        for (int y = 0; y < h; ++y)
            for (int x = s; x < w; ++x) m.set(x, y, false);
    }
    if (m.known_count() == 0) m.set(0, 0, true);
    if (m.unknown_count() == 0) m.set(w - 1, h - 1, false);
    return m;
}

double correlation(const std::vector<double> &a, const std::vector<double> &b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_SUITE("patchgen") {

TEST_CASE("generation is deterministic") {
    const RgbdPatch a = reference_generate({0.0, 0.0}, 1);
    const RgbdPatch b = reference_generate({0.0, 0.0}, 1);
    CHECK(a == b);
    CHECK(a.width() == 224);
    CHECK(a.height() == 224);
    CHECK_FALSE(reference_generate({0.0, 0.0}, 2) == a);
}

TEST_CASE("depth spans [0, 1] and all channels are bounded") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 10; ++i) {
        const RgbdPatch p = reference_generate({u(gen), u(gen), u(gen)}, static_cast<std::uint64_t>(i), 64, 48);
        const float *d = p.plane(RgbdPatch::kDepth);
        CHECK(*std::min_element(d, d + p.pixel_count()) == 0.0f);
        CHECK(*std::max_element(d, d + p.pixel_count()) == 1.0f);
        for (float v : p.data()) CHECK((v >= 0.0f && v <= 1.0f));
    }
}

TEST_CASE("palette endpoints separate mean hue beyond seed variation") {
    std::vector<double> h0, h1;
    for (std::uint64_t s = 0; s < 20; ++s) {
        h0.push_back(mean_hue(reference_generate({0.0, -1.0}, s, 64, 64)));
        h1.push_back(mean_hue(reference_generate({0.0, 1.0}, s, 64, 64)));
    }
    const auto [lo0, hi0] = std::minmax_element(h0.begin(), h0.end());
    const auto [lo1, hi1] = std::minmax_element(h1.begin(), h1.end());
    const double between = std::abs(std::accumulate(h0.begin(), h0.end(), 0.0) - std::accumulate(h1.begin(), h1.end(), 0.0)) / 20;
    CHECK(between > std::max(*hi0 - *lo0, *hi1 - *lo1));
}

TEST_CASE("invalid latents are rejected") {
    CHECK_THROWS_AS(reference_generate({0.0}, 1), DomainError);
    CHECK_THROWS_AS(reference_generate({0.0, NAN}, 1), DomainError);
    CHECK_THROWS_AS(reference_generate({INFINITY, 0.0}, 1), DomainError);
}

TEST_CASE("inpaint identity and error cases") {
    const RgbdPatch p = reference_generate({0.5, 0.5}, 3, 32, 32);
    CHECK(reference_inpaint(p, PixelMask(32, 32, true), InpaintMode::unconditional(), 1) == p);
    CHECK(reference_inpaint(p, PixelMask(32, 32, true), InpaintMode::conditional({0, 0}), 1) == p);
    CHECK_THROWS_AS(reference_inpaint(p, PixelMask(32, 32, false), InpaintMode::unconditional(), 1), DomainError);
    CHECK_THROWS_AS(reference_inpaint(p, PixelMask(16, 32, true), InpaintMode::unconditional(), 1), DomainError);
}

TEST_CASE("constant known region: unconditional fill stays within the detail amplitude") {
    RgbdPatch p(48, 48, 0.0f);
    PixelMask m(48, 48, true);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            for (int c = 0; c < 3; ++c) p.at(c, x, y) = 0.4f;
            p.at(3, x, y) = 0.6f;
            if (x >= 10 && x < 40 && y >= 8 && y < 44) {
                m.set(x, y, false);
                for (int c = 0; c < 4; ++c) p.at(c, x, y) = 0.9f; // garbage under the mask
            }
        }
    const ReferenceGeneratorOptions opt;
    const RgbdPatch out = reference_inpaint(p, m, InpaintMode::unconditional(), 5, opt);
    double worst = 0;
    for (int y = 8; y < 44; ++y)
        for (int x = 10; x < 40; ++x)
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(double(out.at(c, x, y)) - 0.4));
    CHECK(worst <= opt.detail_amplitude + 1e-6);
    CHECK(worst > 0.0);
}

TEST_CASE("known pixels are bit-unchanged over random masks, both modes and the naive baseline") {
    std::mt19937_64 gen(21);
    ReferenceGenerator g;
    for (int t = 0; t < 40; ++t) {
        const int w = 24 + t % 17, h = 20 + t % 13;
        const RgbdPatch p = reference_generate({std::sin(t), std::cos(t)}, static_cast<std::uint64_t>(t), w, h);
        const PixelMask m = random_mask(gen, w, h);
        for (int mode = 0; mode < 3; ++mode) {
            const RgbdPatch out = mode == 0   ? g.inpaint(p, m, InpaintMode::unconditional(), 9)
                                  : mode == 1 ? g.inpaint(p, m, InpaintMode::conditional({1.0, -1.0}), 9)
                                              : naive_fill(g, p, m, {1.0, -1.0}, 9);
            bool same = true, bounded = true;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < 4; ++c) {
                        if (m.known(x, y) && out.at(c, x, y) != p.at(c, x, y)) same = false;
                        if (out.at(c, x, y) < 0.0f || out.at(c, x, y) > 1.0f) bounded = false;
                    }
            CHECK(same);
            CHECK(bounded);
        }
    }
}

TEST_CASE("inpaint is deterministic") {
    const RgbdPatch p = reference_generate({0.1, 0.2}, 8, 40, 40);
    std::mt19937_64 gen(1);
    const PixelMask m = random_mask(gen, 40, 40);
    CHECK(reference_inpaint(p, m, InpaintMode::unconditional(), 3) == reference_inpaint(p, m, InpaintMode::unconditional(), 3));
    CHECK(reference_inpaint(p, m, InpaintMode::conditional({0, 1}), 3) ==
          reference_inpaint(p, m, InpaintMode::conditional({0, 1}), 3));
}

TEST_CASE("conditional fill equals generated content beyond the blend band") {
    const int w = 64, h = 32;
    const RgbdPatch p = reference_generate({-1.0, 0.5}, 4, w, h);
    PixelMask m(w, h, false);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 8; ++x) m.set(x, y, true);
    const LatentVector l{1.0, -0.5};
    const RgbdPatch out = reference_inpaint(p, m, InpaintMode::conditional(l), 6);
    const RgbdPatch gen = reference_generate(l, 6, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 8 + 9; x < w; ++x)
            for (int c = 0; c < 4; ++c) CHECK(out.at(c, x, y) == gen.at(c, x, y));
}

TEST_CASE("unconditional blending scores no worse than naive pasting on the seam metric") {
    for (int t = 0; t < 10; ++t) {
        const int w = 96, h = 48;
        const RgbdPatch a = reference_generate({rng::uniform(t, 1) * 4 - 2, rng::uniform(t, 2) * 2 - 1}, t, w, h);
        PixelMask m(w, h, true);
        for (int y = 0; y < h; ++y)
            for (int x = 32; x < 64; ++x) m.set(x, y, false);
        const LatentVector lb{rng::uniform(t, 3) * 4 - 2, rng::uniform(t, 4) * 2 - 1};
        ReferenceGenerator g;
        const RgbdPatch naive = naive_fill(g, a, m, lb, 100 + t);
        const RgbdPatch blended = g.inpaint(a, m, InpaintMode::unconditional(), 100 + t);
        std::vector<std::int32_t> owner(static_cast<std::size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) owner[static_cast<std::size_t>(y) * w + x] = x < 32 ? 0 : (x < 64 ? 1 : 2);
        const std::vector<SeamSegment> seams{{0, 1, true, 31, 0, h}, {1, 2, true, 63, 0, h}};
        CHECK(seam_score(blended, seams, owner).aggregate <= seam_score(naive, seams, owner).aggregate);
    }
}

TEST_CASE("embedding responsiveness: PCA recovers roughness and palette") {
    ReferenceExtractor ex;
    std::vector<FeatureVector> feats;
    std::vector<double> l0, l1;
    for (int i = 0; i < 200; ++i) {
        const LatentVector l{2 * rng::uniform(12, i, 0) - 1, 2 * rng::uniform(12, i, 1) - 1};
        feats.push_back(ex.extract(reference_generate(l, rng::hash_key(13, {static_cast<std::uint64_t>(i)}))));
        l0.push_back(l[0]);
        l1.push_back(l[1]);
    }
    PcaModel pca = fit_pca(feats, 2);
    std::vector<LatentVector> proj, targets;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        proj.push_back(project(pca, feats[i]));
        targets.push_back({l0[i], l1[i]});
    }
    pca.readout = fit_readout(proj, targets);
    std::vector<double> p0, p1;
    for (const auto &f : feats) {
        const auto l = predict_latent(pca, f);
        p0.push_back(l[0]);
        p1.push_back(l[1]);
    }
    CHECK(correlation(p0, l0) >= 0.9);
    CHECK(correlation(p1, l1) >= 0.9);
}

TEST_CASE("laplace_fill reproduces a linear function from its boundary") {
    const int w = 20, h = 16;
    std::vector<float> plane(static_cast<std::size_t>(w) * h);
    std::vector<std::uint8_t> region(plane.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            plane[i] = 0.01f * x - 0.02f * y + 0.5f;
            if (x > 2 && x < 17 && y > 3 && y < 12) {
                region[i] = 1;
                plane[i] = 0.0f;
            }
        }
    std::array<float *, 1> planes{plane.data()};
    laplace_fill(w, h, region, planes);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            CHECK(plane[static_cast<std::size_t>(y) * w + x] == doctest::Approx(0.01 * x - 0.02 * y + 0.5).epsilon(1e-5));
}

TEST_CASE("laplace_fill rejects a region without boundary") {
    std::vector<float> plane(16, 0.0f);
    std::vector<std::uint8_t> region(16, 1);
    std::array<float *, 1> planes{plane.data()};
    CHECK_THROWS_AS(laplace_fill(4, 4, region, planes), DomainError);
}

TEST_CASE("distance_to counts city-block steps") {
    std::vector<std::uint8_t> seeds(25, 0);
    seeds[12] = 1; // centre of 5x5
    const auto d = distance_to(5, 5, seeds);
    CHECK(d[12] == 0);
    CHECK(d[0] == 4);
    CHECK(d[2] == 2);
    CHECK(d[13] == 1);
}

} // TEST_SUITE
