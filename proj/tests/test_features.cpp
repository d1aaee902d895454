#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "akash/features.hpp"

using namespace akash;

TEST_CASE("extract_features counts single byte with rotation") {
    FileBytes f{0xAB};
    auto x = extract_features(f, 4);
    CHECK(x.counts[0xAB] == 1);
    CHECK(x.counts[256 + 0xBA] == 1);
    CHECK(x.file_length == 1);
    std::size_t nonzero = 0;
    for (auto c : x.counts) nonzero += c != 0;
    CHECK(nonzero == 2);
}

TEST_CASE("extract_features zero bytes are rotation invariant") {
    FileBytes f{0x00, 0x00};
    auto x = extract_features(f, 4);
    CHECK(x.counts[0] == 2);
    CHECK(x.counts[256] == 2);
}

TEST_CASE("extract_features over all byte values: rotation is a bijection") {
    FileBytes f(256);
    for (int v = 0; v < 256; ++v) f[v] = std::uint8_t(v);
    auto x = extract_features(f, 4);
    for (int v = 0; v < 512; ++v) CHECK(x.counts[v] == 1);
}

TEST_CASE("extract_features rejects empty input and bad shifts") {
    CHECK_THROWS_AS(extract_features({}), EmptyFileError);
    CHECK_THROWS_AS(extract_features({0x01}, 0), RangeError);
    CHECK_THROWS_AS(extract_features({0x01}, 8), RangeError);
}

TEST_CASE("both sub-histograms sum to file length for any shift") {
    std::mt19937_64 rng(11);
    for (int shift = 1; shift <= 7; ++shift) {
        FileBytes f(1000);
        for (auto& b : f) b = std::uint8_t(rng() & 0xff);
        auto x = extract_features(f, shift);
        std::uint64_t lo = 0, hi = 0;
        for (int i = 0; i < 256; ++i) {
            lo += x.counts[i];
            hi += x.counts[256 + i];
        }
        CHECK(lo == f.size());
        CHECK(hi == f.size());
    }
}

TEST_CASE("histograms are order-free, uneva is not") {
    std::mt19937_64 rng(5);
    FileBytes f(512);
    for (auto& b : f) b = std::uint8_t(rng() % 4);  // few values, many repeats
    FileBytes shuffled = f;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(extract_features(f).counts == extract_features(shuffled).counts);
    // Adjacent-repeat structure generally changes under a shuffle.
    auto ua = compute_uneva(f), ub = compute_uneva(shuffled);
    std::uint64_t sa = 0, sb = 0;
    for (int v = 0; v < 256; ++v) {
        sa += ua.runs[v];
        sb += ub.runs[v];
    }
    CHECK(sa <= f.size() - 1);
    CHECK(sb <= f.size() - 1);
}

TEST_CASE("compute_uneva counts adjacent repeats") {
    auto u = compute_uneva({0x41, 0x41, 0x41});
    CHECK(u.runs[0x41] == 2);
    std::uint64_t total = 0;
    for (int v = 0; v < 256; ++v) total += u.runs[v];
    CHECK(total == 2);

    auto u2 = compute_uneva({0x01, 0x02, 0x01});
    for (int v = 0; v < 256; ++v) CHECK(u2.runs[v] == 0);

    CHECK_THROWS_AS(compute_uneva({}), EmptyFileError);
}

TEST_CASE("compute_uneva run total bounded by length-1 (brute force)") {
    std::mt19937_64 rng(99);
    FileBytes f(1000);
    for (auto& b : f) b = std::uint8_t(rng() & 0xff);
    auto u = compute_uneva(f);
    // independent scan
    std::uint64_t expect = 0;
    for (std::size_t i = 1; i < f.size(); ++i) expect += f[i] == f[i - 1];
    std::uint64_t total = 0;
    for (int v = 0; v < 256; ++v) total += u.runs[v];
    CHECK(total == expect);
    CHECK(total <= 999);
}

TEST_CASE("transform_counts is log1p per bin") {
    FeatureVector x;
    auto z = transform_counts(x);
    for (double v : z) CHECK(v == 0.0);

    x.counts[3] = 1;
    x.counts[7] = 3;
    x.counts[100] = 7;
    z = transform_counts(x);
    CHECK(z[3] == Catch::Approx(std::log(2.0)));
    CHECK(z[7] == Catch::Approx(std::log(4.0)));
    CHECK(z[100] == Catch::Approx(std::log(8.0)));
}

TEST_CASE("transform_counts preserves argmax of each sub-histogram") {
    std::mt19937_64 rng(17);
    FileBytes f(4096);
    for (auto& b : f) b = std::uint8_t(rng() & 0xff);
    auto x = extract_features(f);
    auto z = transform_counts(x);
    auto argmax_counts = std::max_element(x.counts.begin(), x.counts.begin() + 256) -
                         x.counts.begin();
    auto argmax_z = std::max_element(z.begin(), z.begin() + 256) - z.begin();
    CHECK(argmax_counts == argmax_z);
}

TEST_CASE("extract_features is deterministic") {
    std::mt19937_64 rng(23);
    FileBytes f(2048);
    for (auto& b : f) b = std::uint8_t(rng() & 0xff);
    CHECK(extract_features(f).counts == extract_features(f).counts);
}
