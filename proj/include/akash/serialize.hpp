#pragma once

// Versioned binary model format. Magic "AKSH", little-endian float32 arrays,
// JSON metadata block, 8-byte fingerprint derived from the array payload.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "akash/errors.hpp"
#include "akash/model.hpp"
#include "akash/sha256.hpp"

namespace akash {

using Fingerprint = std::array<std::uint8_t, 8>;

namespace detail {

struct ByteWriter {
    std::vector<std::uint8_t> out;

    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f32(double v) {
        float f = float(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        u32(bits);
    }
    void f32_array(const std::vector<double>& v) {
        for (double x : v) f32(x);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
};

struct ByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > size) throw FormatError("truncated stream", pos);
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return double(f);
    }
    void f32_array(std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = f32();
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data + pos), n);
        pos += n;
        return s;
    }
};

inline void write_bank_arrays(ByteWriter& w, const RandomFeatureBank& bank) {
    w.f32_array(bank.W.data);
    if (bank.kind == FeatureMapKind::Fourier) w.f32_array(bank.phases);
}

inline void write_param_arrays(ByteWriter& w, const NetworkParams& p) {
    w.f32_array(p.bn_scale);
    w.f32_array(p.bn_shift);
    w.f32_array(p.bn_running_mean);
    w.f32_array(p.bn_running_var);
    w.f32_array(p.W2.data);
    w.f32_array(p.b2);
}

inline std::vector<std::uint8_t> model_array_payload(const TrainedModel& m) {
    ByteWriter w;
    write_bank_arrays(w, m.bank_G);
    if (!m.config.share_bank) write_bank_arrays(w, m.bank_D);
    write_param_arrays(w, m.params_G);
    write_param_arrays(w, m.params_D);
    return std::move(w.out);
}

}  // namespace detail

inline Fingerprint model_fingerprint(const TrainedModel& m) {
    auto hash = Sha256::digest(detail::model_array_payload(m));
    Fingerprint fp;
    std::copy(hash.begin(), hash.begin() + 8, fp.begin());
    return fp;
}

inline std::string fingerprint_hex(const Fingerprint& fp) {
    static const char* hexd = "0123456789abcdef";
    std::string s;
    for (auto b : fp) {
        s.push_back(hexd[b >> 4]);
        s.push_back(hexd[b & 15]);
    }
    return s;
}

// Round every parameter through float32 so that the in-memory model equals
// its serialized form exactly.
inline void finalize_model(TrainedModel& m) {
    for (NetworkParams* p : {&m.params_G, &m.params_D}) {
        round_f32(p->bn_scale);
        round_f32(p->bn_shift);
        round_f32(p->bn_running_mean);
        round_f32(p->bn_running_var);
        round_f32(p->W2.data);
        round_f32(p->b2);
    }
    for (auto& e : m.loss_history) {
        e.delta_round1_mean = round_f32(e.delta_round1_mean);
        e.delta_round2_mean = round_f32(e.delta_round2_mean);
    }
}

inline std::vector<std::uint8_t> serialize_model(const TrainedModel& m) {
    const TrainConfig& c = m.config;
    nlohmann::json meta = {
        {"kind", int(m.bank_G.kind)},
        {"s", c.s},
        {"d", m.bank_G.d},
        {"E", c.E},
        {"share_bank", c.share_bank},
        {"bank_seed_G", m.bank_G.seed},
        {"bank_seed_D", m.bank_D.seed},
        {"keep_prob", c.keep_prob},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"rho_max", c.rho_max},
        {"master_seed", c.master_seed},
        {"shift_bits", c.shift_bits},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_epsilon", c.adam_epsilon},
        {"loss_len", m.loss_history.size()},
        {"fingerprint", fingerprint_hex(model_fingerprint(m))},
    };
    std::string meta_str = meta.dump();

    detail::ByteWriter w;
    w.bytes("AKSH", 4);
    w.u32(1);  // version
    w.u32(std::uint32_t(meta_str.size()));
    w.bytes(meta_str.data(), meta_str.size());
    auto arrays = detail::model_array_payload(m);
    w.bytes(arrays.data(), arrays.size());
    for (const auto& e : m.loss_history) {
        w.f32(e.delta_round1_mean);
        w.f32(e.delta_round2_mean);
    }
    return std::move(w.out);
}

inline TrainedModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r{bytes.data(), bytes.size()};
    if (r.str(4) != "AKSH") throw FormatError("bad magic, expected AKSH", 0);
    std::uint32_t version = r.u32();
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version), 4);
    std::uint32_t meta_len = r.u32();
    std::size_t meta_off = r.pos;
    std::string meta_str = r.str(meta_len);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad metadata JSON: ") + e.what(), meta_off);
    }

    TrainedModel m;
    TrainConfig& c = m.config;
    try {
        c.s = meta.at("s").get<std::size_t>();
        c.E = meta.at("E").get<std::size_t>();
        c.share_bank = meta.at("share_bank").get<bool>();
        c.keep_prob = meta.at("keep_prob").get<double>();
        c.batch_size = meta.at("batch_size").get<std::size_t>();
        c.learning_rate = meta.at("learning_rate").get<double>();
        c.epochs = meta.at("epochs").get<std::size_t>();
        c.rho_max = meta.at("rho_max").get<std::size_t>();
        c.master_seed = meta.at("master_seed").get<std::uint64_t>();
        c.shift_bits = meta.at("shift_bits").get<int>();
        c.adam_beta1 = meta.at("adam_beta1").get<double>();
        c.adam_beta2 = meta.at("adam_beta2").get<double>();
        c.adam_epsilon = meta.at("adam_epsilon").get<double>();
        c.feature_map = FeatureMapKind(meta.at("kind").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("missing metadata field: ") + e.what(), meta_off);
    }
    std::size_t d = meta.at("d").get<std::size_t>();
    std::size_t loss_len = meta.at("loss_len").get<std::size_t>();

    auto read_bank = [&](std::uint64_t seed) {
        RandomFeatureBank bank;
        bank.kind = c.feature_map;
        bank.s = c.s;
        bank.d = d;
        bank.seed = seed;
        bank.W = Matrix(c.s, d);
        r.f32_array(bank.W.data, c.s * d);
        if (bank.kind == FeatureMapKind::Fourier) r.f32_array(bank.phases, c.s);
        return bank;
    };
    auto read_params = [&]() {
        NetworkParams p;
        p.s = c.s;
        p.E = c.E;
        r.f32_array(p.bn_scale, c.s);
        r.f32_array(p.bn_shift, c.s);
        r.f32_array(p.bn_running_mean, c.s);
        r.f32_array(p.bn_running_var, c.s);
        p.W2 = Matrix(c.E, c.s);
        r.f32_array(p.W2.data, c.E * c.s);
        r.f32_array(p.b2, c.E);
        return p;
    };

    m.bank_G = read_bank(meta.at("bank_seed_G").get<std::uint64_t>());
    m.bank_D = c.share_bank ? m.bank_G : read_bank(meta.at("bank_seed_D").get<std::uint64_t>());
    m.params_G = read_params();
    m.params_D = read_params();
    m.loss_history.resize(loss_len);
    for (auto& e : m.loss_history) {
        e.delta_round1_mean = r.f32();
        e.delta_round2_mean = r.f32();
    }
    if (r.pos != r.size) throw FormatError("trailing bytes after model payload", r.pos);

    std::string stored_fp = meta.at("fingerprint").get<std::string>();
    if (stored_fp != fingerprint_hex(model_fingerprint(m)))
        throw FormatError("fingerprint mismatch: model payload corrupted", meta_off);
    return m;
}

}  // namespace akash
