#pragma once

// Evaluation harness: robustness curves over perturbation magnitude,
// detection/rejection rates, and adapters for external fuzzy hashers.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "akash/errors.hpp"
#include "akash/perturb.hpp"
#include "akash/sahash.hpp"
#include "akash/similarity.hpp"

namespace akash {

struct PairJudgment {
    double distance = 0.0;
    bool similar = false;
};

// A scorer judges a pair of raw files. Pure; safe to call concurrently.
using Scorer = std::function<PairJudgment(const FileBytes&, const FileBytes&)>;

inline Scorer make_akash_scorer(const TrainedModel& model, ThresholdConfig cfg) {
    return [&model, cfg](const FileBytes& a, const FileBytes& b) {
        auto sc = pair_score(make_digest(model, a), make_digest(model, b), cfg);
        return PairJudgment{sc.delta, sc.similar};
    };
}

inline Scorer make_sahash_scorer(std::uint32_t tau_digest, std::uint32_t tau_uneva) {
    return [=](const FileBytes& a, const FileBytes& b) {
        auto da = sahash_digest(extract_features(a));
        auto db = sahash_digest(extract_features(b));
        PairJudgment j;
        if (da.modulus != db.modulus) {
            // Different size classes cannot be compared by sahash; treat as
            // maximally distant.
            j.distance = double(std::max(da.modulus, db.modulus));
            j.similar = false;
            return j;
        }
        std::uint32_t dist = sahash_distance(da, db);
        std::uint32_t udist = uneva_distance(compute_uneva(a), compute_uneva(b));
        j.distance = double(dist);
        j.similar = sahash_similar(dist, udist, tau_digest, tau_uneva);
        return j;
    };
}

struct CurvePoint {
    std::uint64_t magnitude = 0;
    double mean_distance = 0.0;
    std::vector<double> distances;  // one per trial; NaN marks a skipped trial
    std::size_t skipped = 0;
};

inline std::vector<CurvePoint> robustness_curve(const Scorer& scorer, const FileBytes& f,
                                                const std::vector<std::uint64_t>& rho_grid,
                                                std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw RangeError("trials must be >= 1");
    std::mt19937_64 rng(seed);
    auto regions = protected_regions_pe(f);
    std::vector<CurvePoint> out;
    for (std::uint64_t rho : rho_grid) {
        if (rho < 1) throw RangeError("rho grid values must be >= 1");
        CurvePoint pt;
        pt.magnitude = rho;
        double sum = 0.0;
        std::size_t ok = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            std::uint64_t trial_seed = rng();
            try {
                FileBytes mutant = substitute_bits(f, rho, regions, trial_seed);
                double d = scorer(f, mutant).distance;
                pt.distances.push_back(d);
                sum += d;
                ++ok;
            } catch (const NoMutableBytesError&) {
                pt.distances.push_back(std::numeric_limits<double>::quiet_NaN());
                ++pt.skipped;
            }
        }
        pt.mean_distance = ok ? sum / double(ok) : std::numeric_limits<double>::quiet_NaN();
        out.push_back(std::move(pt));
    }
    return out;
}

inline double detection_rate(const Scorer& scorer,
                             const std::vector<std::pair<FileBytes, FileBytes>>& pairs) {
    if (pairs.empty()) throw InsufficientDataError("no pairs to evaluate");
    std::size_t hits = 0;
    for (const auto& [a, b] : pairs)
        if (scorer(a, b).similar) ++hits;
    return double(hits) / double(pairs.size());
}

inline std::vector<std::pair<std::size_t, std::size_t>> sample_distinct_pairs(
    std::size_t n_files, std::size_t n_pairs, std::uint64_t seed) {
    if (n_files < 2) throw InsufficientDataError("need at least 2 files for distinct pairs");
    std::uint64_t total = std::uint64_t(n_files) * (n_files - 1) / 2;
    if (n_pairs > total) n_pairs = std::size_t(total);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n_files - 1);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (seen.size() < n_pairs) {
        std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        seen.insert({i, j});
    }
    return {seen.begin(), seen.end()};
}

inline double distinct_rejection_rate(const Scorer& scorer, const std::vector<FileBytes>& corpus,
                                      std::size_t n_pairs, std::uint64_t seed) {
    auto idx_pairs = sample_distinct_pairs(corpus.size(), n_pairs, seed);
    std::size_t rejected = 0;
    for (auto [i, j] : idx_pairs)
        if (!scorer(corpus[i], corpus[j]).similar) ++rejected;
    return double(rejected) / double(idx_pairs.size());
}

enum class ExternalHasher { Ssdeep, Sdhash };

// Runs an external fuzzy hasher on a file pair and converts its 0-100
// similarity score to a distance (100 - score). Absent tool -> nullopt;
// present but unparsable output -> AdapterError.
inline std::optional<double> run_external_hasher(ExternalHasher kind, const std::string& file_a,
                                                 const std::string& file_b,
                                                 const std::string& exe_path) {
    if (exe_path.empty()) return std::nullopt;
    {
        std::ifstream probe(exe_path);
        if (!probe) return std::nullopt;
    }
    std::string cmd;
    if (kind == ExternalHasher::Ssdeep)
        cmd = "'" + exe_path + "' -d -a '" + file_a + "' '" + file_b + "' 2>/dev/null";
    else
        cmd = "'" + exe_path + "' -g -t 0 '" + file_a + "' '" + file_b + "' 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return std::nullopt;
    std::string output;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe)) output += buf;
    pclose(pipe);

    // Last integer in the output is the score for both tools.
    std::optional<long> score;
    for (std::size_t i = 0; i < output.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(output[i]))) {
            std::size_t end = i;
            while (end < output.size() && std::isdigit(static_cast<unsigned char>(output[end])))
                ++end;
            score = std::stol(output.substr(i, end - i));
            i = end;
        }
    }
    if (!score || *score < 0 || *score > 100)
        throw AdapterError("no 0-100 score found in tool output", output);
    return 100.0 - double(*score);
}

// --- Report emission ---

struct PairRecord {
    std::string file_a, file_b, cls;
    double delta = 0.0;
    std::uint32_t uneva_dist = 0;
    bool similar = false;
};

inline std::string pair_records_csv(const std::vector<PairRecord>& records) {
    std::ostringstream out;
    out << "file_a,file_b,class,delta,uneva_dist,similar\n";
    for (const auto& r : records)
        out << r.file_a << ',' << r.file_b << ',' << r.cls << ',' << r.delta << ','
            << r.uneva_dist << ',' << (r.similar ? 1 : 0) << '\n';
    return out.str();
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "magnitude,trial,distance\n";
    for (const auto& pt : curve)
        for (std::size_t t = 0; t < pt.distances.size(); ++t) {
            out << pt.magnitude << ',' << t << ',';
            if (std::isnan(pt.distances[t]))
                out << "skip";
            else
                out << pt.distances[t];
            out << '\n';
        }
    return out.str();
}

// Minimal self-contained SVG line chart of mean distance vs magnitude.
inline std::string curve_svg(const std::vector<CurvePoint>& curve, const std::string& title) {
    const int W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmax = 1, ymax = 1e-12;
    for (const auto& pt : curve) {
        xmax = std::max(xmax, double(pt.magnitude));
        if (!std::isnan(pt.mean_distance)) ymax = std::max(ymax, pt.mean_distance);
    }
    auto px = [&](double x) { return ml + (W - ml - mr) * x / xmax; };
    auto py = [&](double y) { return H - mb - (H - mt - mb) * y / ymax; };
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
        << "</text>\n"
        << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n"
        << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    for (const auto& pt : curve)
        if (!std::isnan(pt.mean_distance))
            out << px(double(pt.magnitude)) << ',' << py(pt.mean_distance) << ' ';
    out << "'/>\n";
    for (const auto& pt : curve)
        if (!std::isnan(pt.mean_distance))
            out << "<circle cx='" << px(double(pt.magnitude)) << "' cy='" << py(pt.mean_distance)
                << "' r='3' fill='steelblue'/>\n";
    out << "<text x='" << W / 2 << "' y='" << H - 8
        << "' text-anchor='middle' font-size='12'>perturbation magnitude</text>\n"
        << "<text x='15' y='" << H / 2 << "' font-size='12' transform='rotate(-90 15 " << H / 2
        << ")' text-anchor='middle'>mean distance</text>\n</svg>\n";
    return out.str();
}

struct EvalReport {
    // hasher -> perturbation class -> rate
    nlohmann::json json;
    std::vector<PairRecord> records;
};

}  // namespace akash
