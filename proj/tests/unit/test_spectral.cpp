#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "tats/spectral.hpp"

using namespace tats;
using namespace tats::spectral;
using doctest::Approx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> cosine(std::size_t n, double period, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::cos(kTwoPi * static_cast<double>(t) / period + phase);
    return x;
}

data::EmbeddingSequence circular(std::size_t n, double period) {
    Matrix e(n, 2);
    for (std::size_t t = 0; t < n; ++t) {
        e(t, 0) = std::cos(kTwoPi * static_cast<double>(t) / period);
        e(t, 1) = std::sin(kTwoPi * static_cast<double>(t) / period);
    }
    return data::EmbeddingSequence(e);
}

data::EmbeddingSequence noise_embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed, 100);
    return data::EmbeddingSequence(oracle::random_matrix(n, d, rng));
}

Spectrum make_spectrum(std::vector<double> f, std::vector<double> a) { return Spectrum{std::move(f), std::move(a)}; }

std::size_t nearest_bin(const Spectrum& s, double f) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (std::abs(s.frequencies[i] - f) < std::abs(s.frequencies[best] - f)) best = i;
    return best;
}

}  // namespace

TEST_CASE("difference") {
    CHECK(difference(std::vector<double>{1, 3, 6, 10}) == std::vector<double>{2, 3, 4});
    CHECK(difference(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0});
    CHECK(oracle::error_code([] { difference(std::vector<double>{1}); }) == ErrorCode::TooShort);

    const auto d = difference(cosine(48, 12));
    const auto mags = oracle::direct_dft_magnitudes(d);
    // bins are k/47; 1/12 is nearest k=4
    CHECK(oracle::argmax(mags) + 1 == 4);
}

TEST_CASE("magnitude spectrum matches the direct DFT") {
    const auto s = magnitude_spectrum(cosine(8, 4));
    REQUIRE(s.size() == 4);
    CHECK(s.frequencies == std::vector<double>{0.125, 0.25, 0.375, 0.5});
    for (std::size_t i = 0; i < 4; ++i) CHECK(s.amplitudes[i] == Approx(i == 1 ? 4.0 : 0.0).epsilon(1e-9));
    CHECK(std::abs(s.amplitudes[0]) <= 1e-9);

    const auto z = magnitude_spectrum(std::vector<double>(16, 0.0));
    for (double a : z.amplitudes) CHECK(a == 0.0);

    std::vector<double> two = cosine(32, 8);
    const auto quarter = cosine(32, 4, 0.5);
    for (std::size_t t = 0; t < 32; ++t) two[t] += quarter[t];
    const auto s2 = magnitude_spectrum(two);
    CHECK(s2.amplitudes[3] == Approx(16.0));  // f = 4/32
    CHECK(s2.amplitudes[7] == Approx(8.0));   // f = 8/32
    CHECK(s2.amplitudes[3] == Approx(2.0 * s2.amplitudes[7]));

    Rng rng(5);
    for (std::size_t n : {2u, 3u, 7u, 64u, 101u, 256u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal();
        const auto fast = magnitude_spectrum(x);
        const auto slow = oracle::direct_dft_magnitudes(x);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < slow.size(); ++k) {
            CHECK(fast.frequencies[k] == Approx(static_cast<double>(k + 1) / static_cast<double>(n)));
            CHECK(std::abs(fast.amplitudes[k] - slow[k]) <= 1e-9 * std::max(1.0, slow[k]));
        }
    }
}

TEST_CASE("Parseval-style energy identity on a full spectrum") {
    Rng rng(11);
    std::vector<double> x(64);
    double mean = 0;
    for (auto& v : x) mean += (v = rng.normal());
    mean /= 64;
    for (auto& v : x) v -= mean;
    const auto s = magnitude_spectrum(x);
    double time_energy = 0, freq_energy = 0;
    for (double v : x) time_energy += v * v;
    // one-sided bins 1..31 count twice, Nyquist bin once
    for (std::size_t k = 0; k < s.size(); ++k) freq_energy += (k + 1 == s.size() ? 1.0 : 2.0) * s.amplitudes[k] * s.amplitudes[k];
    CHECK(freq_energy / 64.0 == Approx(time_energy).epsilon(1e-10));
}

TEST_CASE("nms") {
    const auto r = nms(make_spectrum({.1, .2, .3, .4, .5}, {1, 5, 2, 7, 3}), 1);
    CHECK(r.amplitudes == std::vector<double>{0, 5, 0, 7, 0});
    const auto inc = nms(make_spectrum({.1, .2, .3, .4}, {1, 2, 3, 4}), 1);
    CHECK(inc.amplitudes == std::vector<double>{0, 0, 0, 4});
    const auto plateau = nms(make_spectrum({.1, .2, .3}, {4, 4, 4}), 1);
    CHECK(plateau.amplitudes == std::vector<double>{0, 0, 0});
    const auto wide = nms(make_spectrum({.1, .2, .3, .4, .5}, {1, 5, 2, 7, 3}), 2);
    CHECK(wide.amplitudes == std::vector<double>{0, 0, 0, 7, 0});
    CHECK(r.frequencies == std::vector<double>{.1, .2, .3, .4, .5});
    CHECK(oracle::error_code([] { nms(make_spectrum({.1}, {1}), 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("lag similarity") {
    const auto e = circular(12, 4);
    const auto sim = lag_similarity(e, 4);
    REQUIRE(sim.size() == 4);
    CHECK(sim[3] == Approx(1.0));
    CHECK(sim[1] == Approx(-1.0));
    CHECK(sim[0] == Approx(0.0).epsilon(1e-12));

    const auto noise = lag_similarity(noise_embeddings(256, 64, 3), 32);
    for (double v : noise) CHECK(std::abs(v) < 0.2);

    CHECK(oracle::error_code([&] { lag_similarity(e, 12); }) == ErrorCode::InvalidArgument);
    CHECK(oracle::error_code([&] { lag_similarity(e, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("lag similarity skips zero rows after centering") {
    // two distinct rows alternate with a row that equals the mean
    Matrix m(9, 2);
    for (std::size_t t = 0; t < 9; ++t) {
        const int phase = static_cast<int>(t % 3);
        m(t, 0) = phase == 0 ? 1.0 : (phase == 1 ? -1.0 : 0.0);
        m(t, 1) = 2.0;
    }
    const auto sim = lag_similarity(data::EmbeddingSequence(m), 3);
    CHECK(sim[2] == Approx(1.0));   // same phase
    CHECK(sim[0] == Approx(-1.0));  // only the (+1, -1) pairs count
}

TEST_CASE("text spectrum") {
    const auto s4 = text_spectrum(circular(128, 4), 32);
    const auto peak4 = top_frequencies(s4, 1).front();
    CHECK(std::abs(peak4.frequency - 0.25) <= s4.bin_width() + 1e-12);

    const auto s12 = text_spectrum(circular(480, 12), 96);
    const auto peak12 = top_frequencies(s12, 1).front();
    CHECK(std::abs(peak12.frequency - 1.0 / 12.0) <= s12.bin_width() + 1e-12);

    Matrix constant(20, 3, 1.5);
    CHECK(oracle::error_code([&] { text_spectrum(data::EmbeddingSequence(constant), 8); }) ==
          ErrorCode::DegenerateEmbeddings);
}

TEST_CASE("top frequencies") {
    const auto s = make_spectrum({.1, .2, .3, .4}, {0, 9, 3, 7});
    CHECK(top_frequencies(s, 2) == std::vector<FrequencyPeak>{{.2, 9}, {.4, 7}});
    CHECK(top_frequencies(make_spectrum({.1, .2, .3}, {0, 4, 0}), 1) == std::vector<FrequencyPeak>{{.2, 4}});
    CHECK(top_frequencies(make_spectrum({.1, .2, .3}, {5, 1, 5}), 1) == std::vector<FrequencyPeak>{{.1, 5}});
    CHECK(oracle::error_code([&] { top_frequencies(s, 5); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("default max lag") {
    CHECK(default_max_lag(480) == 240);
    CHECK(default_max_lag(3) == 1);
    CHECK(default_max_lag(2) == 1);
}

TEST_CASE("period preservation through differencing, sampled") {
    for (int p : {3, 5, 7, 12, 24}) {
        for (double phase : {0.0, 1.1}) {
            const auto s = magnitude_spectrum(difference(cosine(480, p, 2.0, phase)));
            CHECK(oracle::argmax(s.amplitudes) == nearest_bin(s, 1.0 / p));
        }
    }
}

TEST_CASE("circular embeddings peak at their period, sampled") {
    for (int p : {3, 6, 12, 24}) {
        const auto s = text_spectrum(circular(480, p), 240);
        CHECK(oracle::argmax(s.amplitudes) == nearest_bin(s, 1.0 / p));
    }
}

namespace {

data::MultimodalDataset periodic_pair(std::size_t n, double series_period, const data::EmbeddingSequence& e,
                                      std::uint64_t seed) {
    Rng rng(seed, 200);
    Matrix x(n, 1);
    for (std::size_t t = 0; t < n; ++t)
        x(t, 0) = std::cos(kTwoPi * static_cast<double>(t) / series_period) + 0.05 * rng.normal();
    return data::MultimodalDataset(data::TimeSeries(x), e, data::chronological_split(n));
}

}  // namespace

TEST_CASE("analyze_ctr on aligned periodic data") {
    const auto ds = periodic_pair(480, 12, circular(480, 12), 1);
    const auto r = analyze_ctr(ds, {.nms_radius = 2, .top_l = 4});
    CHECK(r.max_lag == 240);
    REQUIRE(r.top_text_frequencies.size() == 4);
    CHECK(r.top_text_frequencies.front().matched);
    CHECK(r.top_text_frequencies.front().matched_variables == std::vector<std::size_t>{0});
    CHECK(r.series_spectra.size() == 1);
}

TEST_CASE("analyze_ctr rarely matches noise embeddings") {
    std::size_t clean = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto ds = periodic_pair(240, 12, noise_embeddings(240, 8, seed), seed);
        if (analyze_ctr(ds).matched_count() == 0) ++clean;
    }
    CHECK(clean >= 95);
}

TEST_CASE("analyze_ctr on an all-zero series") {
    const auto ds = data::MultimodalDataset(data::TimeSeries(Matrix(64, 1)), circular(64, 8), {40, 50});
    const auto r = analyze_ctr(ds);
    for (double a : r.series_spectra[0].amplitudes) CHECK(a == 0.0);
    CHECK(r.matched_count() == 0);
}
