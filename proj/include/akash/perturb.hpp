#pragma once

// File perturbation: seeded bit substitutions that avoid protected header
// regions, plus insertion/deletion/overlay edits for generalization tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <variant>
#include <vector>

#include "akash/bytes.hpp"
#include "akash/errors.hpp"

namespace akash {

struct ByteRange {
    std::uint64_t start = 0;
    std::uint64_t end = 0;  // exclusive
};

struct ProtectedRegions {
    std::vector<ByteRange> ranges;  // sorted, non-overlapping, in-bounds

    bool contains(std::uint64_t off) const {
        for (const auto& r : ranges)
            if (off >= r.start && off < r.end) return true;
        return false;
    }
};

namespace detail {

inline std::uint32_t read_u16le(const FileBytes& f, std::size_t off) {
    return std::uint32_t(f[off]) | (std::uint32_t(f[off + 1]) << 8);
}

inline std::uint32_t read_u32le(const FileBytes& f, std::size_t off) {
    return std::uint32_t(f[off]) | (std::uint32_t(f[off + 1]) << 8) |
           (std::uint32_t(f[off + 2]) << 16) | (std::uint32_t(f[off + 3]) << 24);
}

inline ProtectedRegions normalize(std::vector<ByteRange> ranges, std::uint64_t len) {
    for (auto& r : ranges) {
        r.start = std::min(r.start, len);
        r.end = std::min(r.end, len);
    }
    std::sort(ranges.begin(), ranges.end(),
              [](const ByteRange& a, const ByteRange& b) { return a.start < b.start; });
    ProtectedRegions out;
    for (const auto& r : ranges) {
        if (r.start >= r.end) continue;
        if (!out.ranges.empty() && r.start <= out.ranges.back().end)
            out.ranges.back().end = std::max(out.ranges.back().end, r.end);
        else
            out.ranges.push_back(r);
    }
    return out;
}

}  // namespace detail

// Regions that bit substitutions must not touch. For PE files: everything up
// to SizeOfHeaders plus the section table. Anything else (or a malformed PE)
// gets the generic first-1024-bytes heuristic.
inline ProtectedRegions protected_regions_pe(const FileBytes& f) {
    const std::uint64_t len = f.size();
    auto generic = [&] {
        return detail::normalize({{0, std::min<std::uint64_t>(len, 1024)}}, len);
    };
    if (len < 0x40 || f[0] != 'M' || f[1] != 'Z') return generic();
    std::uint32_t pe_off = detail::read_u32le(f, 0x3c);
    if (std::uint64_t(pe_off) + 24 > len) return generic();
    if (!(f[pe_off] == 'P' && f[pe_off + 1] == 'E' && f[pe_off + 2] == 0 && f[pe_off + 3] == 0))
        return generic();
    std::uint32_t num_sections = detail::read_u16le(f, pe_off + 6);
    std::uint32_t opt_size = detail::read_u16le(f, pe_off + 20);
    std::uint64_t opt_off = std::uint64_t(pe_off) + 24;
    // SizeOfHeaders sits at offset 60 in the optional header (same place in
    // PE32 and PE32+).
    if (opt_size < 64 || opt_off + opt_size > len) return generic();
    std::uint32_t size_of_headers = detail::read_u32le(f, std::size_t(opt_off) + 60);
    std::uint64_t section_table = opt_off + opt_size;
    std::uint64_t section_table_end = section_table + std::uint64_t(num_sections) * 40;
    if (size_of_headers == 0 || size_of_headers > len || section_table_end > len)
        return generic();
    return detail::normalize({{0, size_of_headers}, {section_table, section_table_end}}, len);
}

// Flips exactly rho distinct bit positions, sampled uniformly without
// replacement from bytes outside the protected regions.
inline FileBytes substitute_bits(const FileBytes& f, std::uint64_t rho,
                                 const ProtectedRegions& regions, std::uint64_t seed) {
    if (rho < 1) throw RangeError("rho must be >= 1");
    std::vector<std::uint64_t> mutable_bytes;
    mutable_bytes.reserve(f.size());
    {
        std::size_t ri = 0;
        for (std::uint64_t i = 0; i < f.size(); ++i) {
            while (ri < regions.ranges.size() && i >= regions.ranges[ri].end) ++ri;
            bool prot = ri < regions.ranges.size() && i >= regions.ranges[ri].start &&
                        i < regions.ranges[ri].end;
            if (!prot) mutable_bytes.push_back(i);
        }
    }
    std::uint64_t total_bits = std::uint64_t(mutable_bytes.size()) * 8;
    if (rho > total_bits) throw NoMutableBytesError();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total_bits - 1);
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(std::size_t(rho) * 2);
    FileBytes out = f;
    while (chosen.size() < rho) {
        std::uint64_t bit = pick(rng);
        if (!chosen.insert(bit).second) continue;
        std::uint64_t byte_idx = mutable_bytes[std::size_t(bit / 8)];
        out[std::size_t(byte_idx)] ^= std::uint8_t(1u << (bit % 8));
    }
    return out;
}

struct BitSubstitution {
    std::uint64_t rho = 1;
};
struct InsertBytes {
    std::uint64_t offset = 0;
    FileBytes payload;
};
struct DeleteBytes {
    std::uint64_t offset = 0;
    std::uint64_t len = 0;
};
struct AppendOverlay {
    std::uint64_t len = 0;
};
struct TruncateOverlay {
    std::uint64_t len = 0;
};

struct PerturbSpec {
    std::variant<BitSubstitution, InsertBytes, DeleteBytes, AppendOverlay, TruncateOverlay> kind;
    std::uint64_t seed = 0;
};

inline FileBytes apply_edit(const FileBytes& f, const PerturbSpec& spec) {
    FileBytes out;
    if (auto* sub = std::get_if<BitSubstitution>(&spec.kind)) {
        return substitute_bits(f, sub->rho, protected_regions_pe(f), spec.seed);
    } else if (auto* ins = std::get_if<InsertBytes>(&spec.kind)) {
        if (ins->offset > f.size()) throw RangeError("insert offset past end of file");
        out.reserve(f.size() + ins->payload.size());
        out.insert(out.end(), f.begin(), f.begin() + std::ptrdiff_t(ins->offset));
        out.insert(out.end(), ins->payload.begin(), ins->payload.end());
        out.insert(out.end(), f.begin() + std::ptrdiff_t(ins->offset), f.end());
    } else if (auto* del = std::get_if<DeleteBytes>(&spec.kind)) {
        if (del->offset + del->len > f.size()) throw RangeError("delete range past end of file");
        out = f;
        out.erase(out.begin() + std::ptrdiff_t(del->offset),
                  out.begin() + std::ptrdiff_t(del->offset + del->len));
    } else if (auto* ov = std::get_if<AppendOverlay>(&spec.kind)) {
        out = f;
        std::mt19937_64 rng(spec.seed);
        std::uniform_int_distribution<int> byte(0, 255);
        for (std::uint64_t i = 0; i < ov->len; ++i) out.push_back(std::uint8_t(byte(rng)));
    } else {
        auto& tr = std::get<TruncateOverlay>(spec.kind);
        if (tr.len >= f.size()) throw RangeError("truncation would empty the file");
        out.assign(f.begin(), f.end() - std::ptrdiff_t(tr.len));
    }
    return out;
}

struct TrainingPairs {
    std::vector<std::pair<FileBytes, FileBytes>> pairs;
    std::size_t skipped = 0;  // files with no mutable bits
};

inline TrainingPairs make_training_pairs(const std::vector<FileBytes>& corpus,
                                         std::uint64_t rho_max, std::uint64_t seed) {
    if (corpus.empty()) throw InsufficientDataError("corpus is empty");
    if (rho_max < 1) throw RangeError("rho_max must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> rho_dist(1, rho_max);
    TrainingPairs out;
    for (const auto& f : corpus) {
        std::uint64_t rho = rho_dist(rng);
        std::uint64_t sub_seed = rng();
        try {
            out.pairs.emplace_back(f, substitute_bits(f, rho, protected_regions_pe(f), sub_seed));
        } catch (const NoMutableBytesError&) {
            ++out.skipped;
        }
    }
    return out;
}

}  // namespace akash
