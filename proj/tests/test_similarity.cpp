#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "akash/similarity.hpp"
#include "akash/trainer.hpp"
#include "support/synthetic.hpp"

using namespace akash;

namespace {

TrainedModel tiny_model(std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.s = 32;
    cfg.E = 16;
    cfg.master_seed = seed;
    cfg.epochs = 0;
    cfg.batch_size = 2;
    TrainerState st = init_trainer(cfg);
    TrainedModel m;
    m.bank_G = st.bank_G;
    m.bank_D = st.bank_D;
    m.params_G = st.params_G;
    m.params_D = st.params_D;
    m.config = cfg;
    finalize_model(m);
    return m;
}

Digest random_digest(std::size_t E, std::mt19937_64& rng, const Fingerprint& fp) {
    Digest d;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto prob_vec = [&] {
        std::vector<double> v(E);
        double sum = 0.0;
        for (auto& x : v) {
            x = uni(rng) + 1e-3;
            sum += x;
        }
        for (auto& x : v) x /= sum;
        return v;
    };
    d.h_G = prob_vec();
    d.h_D = prob_vec();
    d.model_fingerprint = fp;
    d.file_length = 100;
    for (auto& r : d.uneva.runs) r = std::uint32_t(rng() % 5);
    return d;
}

}  // namespace

TEST_CASE("mmd_batch basics and oracle") {
    Matrix a(1, 2), b(1, 2);
    a(0, 0) = 1.0;
    b(0, 1) = 1.0;
    CHECK(mmd_batch(a, a) == 0.0);
    CHECK(mmd_batch(a, b) == Catch::Approx(2.0));

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix x(5, 4), y(5, 4);
        std::normal_distribution<double> gauss;
        for (auto& v : x.data) v = gauss(rng);
        for (auto& v : y.data) v = gauss(rng);
        // brute-force oracle
        double expect = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            double ma = 0.0, mb = 0.0;
            for (std::size_t r = 0; r < 5; ++r) {
                ma += x(r, c);
                mb += y(r, c);
            }
            double d = ma / 5 - mb / 5;
            expect += d * d;
        }
        CHECK(std::abs(mmd_batch(x, y) - expect) < 1e-9);
    }
    Matrix bad(2, 3);
    CHECK_THROWS_AS(mmd_batch(a, bad), ShapeError);
}

TEST_CASE("make_digest: determinism, probability rows, order invariance") {
    auto model = tiny_model();
    std::mt19937_64 rng(3);
    FileBytes f(4096);
    for (auto& b : f) b = std::uint8_t(rng() % 7);

    auto d1 = make_digest(model, f);
    auto d2 = make_digest(model, f);
    CHECK(d1.h_G == d2.h_G);
    CHECK(d1.h_D == d2.h_D);

    double sg = 0, sd = 0;
    for (double v : d1.h_G) sg += v;
    for (double v : d1.h_D) sd += v;
    CHECK(std::abs(sg - 1.0) < 1e-6);
    CHECK(std::abs(sd - 1.0) < 1e-6);

    FileBytes shuffled = f;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto dp = make_digest(model, shuffled);
    CHECK(dp.h_G == d1.h_G);
    CHECK(dp.h_D == d1.h_D);

    CHECK_THROWS_AS(make_digest(model, {}), EmptyFileError);
}

TEST_CASE("pair_score is exactly symmetric and gated") {
    auto model = tiny_model();
    std::mt19937_64 rng(4);
    Fingerprint fp = model_fingerprint(model);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_digest(8, rng, fp);
        auto b = random_digest(8, rng, fp);
        ThresholdConfig cfg{0.5, 80};
        auto ab = pair_score(a, b, cfg);
        auto ba = pair_score(b, a, cfg);
        CHECK(ab.delta == ba.delta);
        CHECK(ab.uneva_dist == ba.uneva_dist);
        CHECK(ab.similar == ba.similar);
        CHECK(ab.delta <= std::sqrt(2.0) + 1e-6);
    }
}

TEST_CASE("pair_score cross-matched embeddings give zero delta") {
    auto model = tiny_model();
    std::mt19937_64 rng(6);
    Fingerprint fp = model_fingerprint(model);
    auto a = random_digest(4, rng, fp);
    auto b = a;
    b.h_G = a.h_D;
    b.h_D = a.h_G;
    auto sc = pair_score(a, b, {1.0, 1000});
    CHECK(sc.delta == 0.0);
    CHECK(sc.similar);
}

TEST_CASE("pair_score rejects mismatched fingerprints") {
    std::mt19937_64 rng(7);
    auto a = random_digest(4, rng, {1, 2, 3, 4, 5, 6, 7, 8});
    auto b = random_digest(4, rng, {8, 7, 6, 5, 4, 3, 2, 1});
    CHECK_THROWS_AS(pair_score(a, b, {}), ModelMismatchError);
}

TEST_CASE("delta satisfies the relaxed triangle inequality") {
    // d(a,c) <= d(a,b) + d(b,c) + d(b,b); the self-distance term is the gap
    // between the two networks at b and vanishes only when they agree.
    auto model = tiny_model();
    std::mt19937_64 rng(8);
    Fingerprint fp = model_fingerprint(model);
    ThresholdConfig cfg{};
    for (int trial = 0; trial < 200; ++trial) {
        auto a = random_digest(6, rng, fp);
        auto b = random_digest(6, rng, fp);
        auto c = random_digest(6, rng, fp);
        double ab = pair_score(a, b, cfg).delta;
        double bc = pair_score(b, c, cfg).delta;
        double ac = pair_score(a, c, cfg).delta;
        double bb = pair_score(b, b, cfg).delta;
        CHECK(ab >= 0.0);
        CHECK(ac <= ab + bc + bb + 1e-9);
    }
}

TEST_CASE("calibrate_threshold") {
    std::vector<double> pos(25, 0.05), neg(25, 1.2);
    pos[3] = 0.1;
    auto cfg = calibrate_threshold(pos, neg, 0.0);
    CHECK(cfg.tau_delta >= 0.1);
    CHECK(cfg.tau_delta < 1.0);
    CHECK(cfg.tau_uneva == 80);

    auto all = calibrate_threshold(pos, neg, 1.0);
    CHECK(all.tau_delta == 1.2);

    // achieved FP rate respects the target on random scores
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> rp(100), rn(100);
    for (auto& v : rp) v = uni(rng) * 0.7;
    for (auto& v : rn) v = 0.2 + uni(rng);
    for (double target : {0.0, 0.05, 0.25, 0.6}) {
        auto c = calibrate_threshold(rp, rn, target);
        std::size_t fp_count = 0;
        for (double v : rn) fp_count += v <= c.tau_delta;
        CHECK(double(fp_count) / rn.size() <= target + 1e-12);
    }

    CHECK_THROWS_AS(calibrate_threshold({}, neg, 0.0), InsufficientDataError);
}

TEST_CASE("model serialization round trip is bit-exact") {
    auto model = tiny_model(99);
    auto bytes = serialize_model(model);
    auto back = deserialize_model(bytes);
    CHECK(back.bank_G.W.data == model.bank_G.W.data);
    CHECK(back.bank_G.phases == model.bank_G.phases);
    CHECK(back.params_G.W2.data == model.params_G.W2.data);
    CHECK(back.params_D.bn_running_var == model.params_D.bn_running_var);
    CHECK(back.config.s == model.config.s);
    CHECK(model_fingerprint(back) == model_fingerprint(model));
    CHECK(serialize_model(back) == bytes);
}

TEST_CASE("model deserialization rejects damage") {
    auto model = tiny_model(3);
    auto bytes = serialize_model(model);

    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_model(truncated), FormatError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), FormatError);

    // corrupt a parameter byte: fingerprint check must fire
    auto corrupted = bytes;
    corrupted[corrupted.size() - 20] ^= 0xff;
    CHECK_THROWS_AS(deserialize_model(corrupted), FormatError);
}

TEST_CASE("digest serialization round trip and text form") {
    auto model = tiny_model(5);
    std::mt19937_64 rng(1);
    FileBytes f(2048);
    for (auto& b : f) b = std::uint8_t(rng() & 0xff);
    auto d = make_digest(model, f);

    auto bytes = serialize_digest(d);
    auto back = deserialize_digest(bytes);
    CHECK(back.h_G == d.h_G);
    CHECK(back.h_D == d.h_D);
    CHECK(back.model_fingerprint == d.model_fingerprint);
    CHECK(back.uneva.runs == d.uneva.runs);
    CHECK(back.file_length == d.file_length);

    auto text = digest_to_text(d);
    auto from_text = digest_from_text(text);
    CHECK(from_text.h_G == d.h_G);

    // quantized mode: lossy but close, and the flag survives the trip
    auto q = deserialize_digest(serialize_digest(d, DigestEncoding::QuantizedU8));
    for (std::size_t i = 0; i < d.h_G.size(); ++i)
        CHECK(std::abs(q.h_G[i] - d.h_G[i]) < 0.01);

    auto truncated = bytes;
    truncated.resize(10);
    CHECK_THROWS_AS(deserialize_digest(truncated), FormatError);
}

TEST_CASE("digest fingerprint recomputation matches") {
    auto model = tiny_model(6);
    FileBytes f{1, 2, 3, 4, 5, 6, 7, 8};
    auto d = make_digest(model, f);
    CHECK(d.model_fingerprint == model_fingerprint(model));
    auto hash = Sha256::digest(detail::model_array_payload(model));
    for (int i = 0; i < 8; ++i) CHECK(d.model_fingerprint[i] == hash[i]);
}
