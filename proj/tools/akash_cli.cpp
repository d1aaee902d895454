// akash command-line tool: train models, emit digests, compare files,
// generate mutants, and run evaluations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "akash/akash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDefaultSizeCap = 64ull << 20;

std::vector<std::string> list_corpus(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<akash::FileBytes> load_corpus(const std::vector<std::string>& paths,
                                          std::size_t size_cap) {
    std::vector<akash::FileBytes> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(akash::read_file(p, size_cap));
    return out;
}

void echo_config(const json& cfg) { std::cerr << "resolved config: " << cfg.dump() << "\n"; }

akash::FeatureMapKind parse_map_kind(const std::string& name) {
    if (name == "fourier") return akash::FeatureMapKind::Fourier;
    if (name == "laplace-exp") return akash::FeatureMapKind::LaplaceExponential;
    if (name == "laplace-levy") return akash::FeatureMapKind::LaplaceLevy;
    throw akash::Error("unknown feature map kind: " + name);
}

// Grammar: bitsub:rho=N | insert:off=N,len=N | delete:off=N,len=N |
//          overlay:len=N | truncate:len=N
akash::PerturbSpec parse_perturb_spec(const std::string& text, std::uint64_t seed) {
    auto colon = text.find(':');
    std::string kind = text.substr(0, colon);
    std::map<std::string, std::uint64_t> kv;
    if (colon != std::string::npos) {
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos < rest.size()) {
            auto comma = rest.find(',', pos);
            std::string item = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
            auto eq = item.find('=');
            if (eq == std::string::npos) throw akash::Error("bad perturb spec item: " + item);
            kv[item.substr(0, eq)] = std::stoull(item.substr(eq + 1));
            pos = comma == std::string::npos ? rest.size() : comma + 1;
        }
    }
    akash::PerturbSpec spec;
    spec.seed = seed;
    if (kind == "bitsub") {
        spec.kind = akash::BitSubstitution{kv.count("rho") ? kv["rho"] : 1};
    } else if (kind == "insert") {
        akash::InsertBytes ins;
        ins.offset = kv["off"];
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> byte(0, 255);
        for (std::uint64_t i = 0; i < kv["len"]; ++i)
            ins.payload.push_back(std::uint8_t(byte(rng)));
        spec.kind = std::move(ins);
    } else if (kind == "delete") {
        spec.kind = akash::DeleteBytes{kv["off"], kv["len"]};
    } else if (kind == "overlay") {
        spec.kind = akash::AppendOverlay{kv["len"]};
    } else if (kind == "truncate") {
        spec.kind = akash::TruncateOverlay{kv["len"]};
    } else {
        throw akash::Error("unknown perturb kind: " + kind);
    }
    return spec;
}

akash::TrainedModel load_model(const std::string& path) {
    return akash::deserialize_model(akash::read_file(path));
}

std::string default_model_path(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("AKASH_MODEL")) return env;
    throw akash::Error("no model path given (flag --model or AKASH_MODEL)");
}

int cmd_train(const std::string& corpus_dir, const std::string& out_path,
              const akash::TrainConfig& cfg, std::size_t size_cap,
              const std::string& loss_csv_path) {
    auto paths = list_corpus(corpus_dir);
    if (paths.empty()) {
        std::cerr << "error: corpus directory has no regular files: " << corpus_dir << "\n";
        return 2;
    }
    auto corpus = load_corpus(paths, size_cap);
    std::mt19937_64 seeder(cfg.master_seed);
    auto pairs = akash::make_training_pairs(corpus, cfg.rho_max, seeder());
    if (pairs.skipped)
        std::cerr << "warning: " << pairs.skipped << " files had no mutable bytes, skipped\n";
    if (pairs.pairs.empty()) {
        std::cerr << "error: no usable training pairs\n";
        return 2;
    }
    if (pairs.pairs.size() < cfg.batch_size)
        std::cerr << "warning: corpus smaller than one batch, shrinking batch to "
                  << pairs.pairs.size() << "\n";

    std::ofstream loss_csv;
    if (!loss_csv_path.empty()) {
        loss_csv.open(loss_csv_path, std::ios::trunc);
        loss_csv << "epoch,delta_round1_mean,delta_round2_mean\n";
    }
    auto model = akash::train(pairs.pairs, cfg,
                              [&](std::size_t epoch, const akash::EpochLoss& loss) {
                                  if (loss_csv.is_open())
                                      loss_csv << epoch << ',' << loss.delta_round1_mean << ','
                                               << loss.delta_round2_mean << '\n';
                              });
    akash::write_file(out_path, akash::serialize_model(model));
    std::cerr << "model written: " << out_path << " fingerprint "
              << akash::fingerprint_hex(akash::model_fingerprint(model)) << "\n";
    return 0;
}

int cmd_digest(const std::string& model_path, const std::vector<std::string>& files,
               bool quantized) {
    auto model = load_model(model_path);
    auto enc = quantized ? akash::DigestEncoding::QuantizedU8 : akash::DigestEncoding::Float32;
    for (const auto& f : files)
        std::cout << akash::digest_to_text(akash::make_digest(model, akash::read_file(f)), enc)
                  << "\n";
    return 0;
}

int cmd_compare(const std::string& model_path, const std::vector<std::string>& files,
                const std::vector<std::string>& digest_texts, const akash::ThresholdConfig& cfg) {
    akash::Digest a, b;
    if (digest_texts.size() == 2) {
        a = akash::digest_from_text(digest_texts[0]);
        b = akash::digest_from_text(digest_texts[1]);
    } else if (files.size() == 2) {
        auto model = load_model(model_path);
        a = akash::make_digest(model, akash::read_file(files[0]));
        b = akash::make_digest(model, akash::read_file(files[1]));
    } else {
        std::cerr << "error: give two files or --digests with two records\n";
        return 2;
    }
    auto sc = akash::pair_score(a, b, cfg);
    json out = {{"delta", sc.delta},
                {"uneva_dist", sc.uneva_dist},
                {"similar", sc.similar},
                {"tau_delta", cfg.tau_delta},
                {"tau_uneva", cfg.tau_uneva}};
    std::cout << out.dump() << "\n";
    return sc.similar ? 0 : 1;
}

int cmd_fuzz(const std::string& in_path, const std::string& spec_text, std::uint64_t seed,
             const std::string& out_path) {
    auto f = akash::read_file(in_path);
    auto mutant = akash::apply_edit(f, parse_perturb_spec(spec_text, seed));
    akash::write_file(out_path, mutant);
    std::cerr << "mutant written: " << out_path << " (" << mutant.size() << " bytes)\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_dir,
             const std::string& out_dir, const std::vector<std::string>& scenarios,
             std::size_t n_pairs, std::uint64_t rho, std::uint64_t seed,
             const akash::ThresholdConfig& cfg, std::uint32_t sahash_tau,
             const std::string& curve_file, const std::string& ssdeep_path,
             const std::string& sdhash_path) {
    auto model = load_model(model_path);
    auto paths = list_corpus(corpus_dir);
    if (paths.size() < 2) {
        std::cerr << "error: eval needs at least 2 corpus files\n";
        return 2;
    }
    auto corpus = load_corpus(paths, kDefaultSizeCap);
    fs::create_directories(out_dir);

    auto akash_scorer = akash::make_akash_scorer(model, cfg);
    auto sahash_scorer = akash::make_sahash_scorer(sahash_tau, cfg.tau_uneva);
    std::mt19937_64 rng(seed);

    json report;
    report["seed"] = seed;
    report["thresholds"] = {{"tau_delta", cfg.tau_delta},
                            {"tau_uneva", cfg.tau_uneva},
                            {"sahash_tau_digest", sahash_tau}};
    // Legend mapping our neutral names onto the conventional table names.
    report["legend"] = {{"detection_rate", "fraction of perturbed pairs judged similar"},
                        {"distinct_rejection_rate", "fraction of random distinct pairs judged dissimilar"}};
    std::vector<akash::PairRecord> records;

    double rej_akash = akash::distinct_rejection_rate(akash_scorer, corpus, n_pairs, rng());
    double rej_sahash = akash::distinct_rejection_rate(sahash_scorer, corpus, n_pairs, rng());
    report["akash"]["distinct_rejection_rate"] = rej_akash;
    report["sahash"]["distinct_rejection_rate"] = rej_sahash;

    for (const auto& scenario : scenarios) {
        std::vector<std::pair<akash::FileBytes, akash::FileBytes>> pairs;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const auto& f = corpus[i];
            try {
                akash::FileBytes mutant;
                if (scenario == "bitsub") {
                    mutant = akash::substitute_bits(f, rho, akash::protected_regions_pe(f), rng());
                } else if (scenario == "insdel") {
                    akash::PerturbSpec spec;
                    spec.seed = rng();
                    std::uint64_t amount = std::max<std::uint64_t>(1, f.size() / 100);
                    switch (rng() % 3) {
                        case 0: {
                            akash::InsertBytes ins;
                            ins.offset = f.size() / 2;
                            std::mt19937_64 prng(spec.seed);
                            for (std::uint64_t k = 0; k < amount; ++k)
                                ins.payload.push_back(std::uint8_t(prng() & 0xff));
                            spec.kind = std::move(ins);
                            break;
                        }
                        case 1:
                            spec.kind = akash::DeleteBytes{f.size() / 2,
                                                           std::min<std::uint64_t>(amount,
                                                                                   f.size() / 4)};
                            break;
                        default:
                            spec.kind = akash::AppendOverlay{amount};
                    }
                    mutant = akash::apply_edit(f, spec);
                } else {
                    std::cerr << "error: unknown scenario " << scenario << "\n";
                    return 2;
                }
                pairs.emplace_back(f, std::move(mutant));
                names.push_back(paths[i]);
            } catch (const akash::NoMutableBytesError&) {
                continue;
            }
        }
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            auto sc = akash::pair_score(akash::make_digest(model, pairs[i].first),
                                        akash::make_digest(model, pairs[i].second), cfg);
            records.push_back({names[i], names[i] + "#mutant", scenario, sc.delta, sc.uneva_dist,
                               sc.similar});
        }
        report["akash"]["detection_rate"][scenario] = akash::detection_rate(akash_scorer, pairs);
        report["sahash"]["detection_rate"][scenario] = akash::detection_rate(sahash_scorer, pairs);
        report["pair_count"][scenario] = pairs.size();

        if (!ssdeep_path.empty() || !sdhash_path.empty()) {
            // External hashers read from disk; score the first few pairs only.
            json ext = json::array();
            for (std::size_t i = 0; i < std::min<std::size_t>(pairs.size(), 16); ++i) {
                std::string ma = out_dir + "/ext_a.bin", mb = out_dir + "/ext_b.bin";
                akash::write_file(ma, pairs[i].first);
                akash::write_file(mb, pairs[i].second);
                json row;
                row["pair"] = names[i];
                auto sd = akash::run_external_hasher(akash::ExternalHasher::Ssdeep, ma, mb,
                                                     ssdeep_path);
                if (sd) row["ssdeep_distance"] = *sd;
                auto sh = akash::run_external_hasher(akash::ExternalHasher::Sdhash, ma, mb,
                                                     sdhash_path);
                if (sh) row["sdhash_distance"] = *sh;
                ext.push_back(row);
            }
            report["external"][scenario] = ext;
        }
    }

    if (!curve_file.empty()) {
        auto f = akash::read_file(curve_file);
        std::vector<std::uint64_t> grid{10, 50, 100, 250, 500, 1000};
        auto curve = akash::robustness_curve(akash_scorer, f, grid, 5, rng());
        std::ofstream(out_dir + "/curve.csv") << akash::curve_csv(curve);
        std::ofstream(out_dir + "/curve.svg")
            << akash::curve_svg(curve, "distance vs bit substitutions");
    }

    std::ofstream(out_dir + "/report.json") << report.dump(2) << "\n";
    std::ofstream(out_dir + "/pairs.csv") << akash::pair_records_csv(records);
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"akash: learned fuzzy hashing toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file; flags override config values");

    // train
    auto* train = app.add_subcommand("train", "train a model on a corpus directory");
    std::string corpus_dir, out_model, loss_csv, map_kind = "fourier";
    akash::TrainConfig tc;
    tc.batch_size = 100;  // desk-scale default; the full-scale value is 1000
    tc.epochs = 200;
    std::size_t size_cap = kDefaultSizeCap;
    train->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train->add_option("--out", out_model, "output model path")->required();
    train->add_option("--epochs", tc.epochs, "training epochs");
    train->add_option("--batch-size", tc.batch_size, "stage batch size");
    train->add_option("--lr", tc.learning_rate, "learning rate for both networks");
    train->add_option("--keep-prob", tc.keep_prob, "dropout keep probability");
    train->add_option("--features", tc.s, "random feature count s");
    train->add_option("--embedding", tc.E, "embedding size E");
    train->add_option("--rho-max", tc.rho_max, "max bits substituted per training pair");
    train->add_option("--seed", tc.master_seed, "master seed");
    train->add_option("--map", map_kind, "feature map: fourier|laplace-exp|laplace-levy");
    train->add_option("--shift-bits", tc.shift_bits, "circular shift for the second histogram");
    train->add_flag("--per-network-banks", [&tc](std::int64_t) { tc.share_bank = false; },
                    "sample a separate feature bank per network");
    train->add_option("--early-stop", tc.early_stop_rel_change,
                      "relative delta change for early stop (0 disables)");
    train->add_option("--loss-csv", loss_csv, "write per-epoch losses to this CSV");
    train->add_option("--max-file-size", size_cap, "per-file size cap in bytes");

    // digest
    auto* digest = app.add_subcommand("digest", "print base64 digests for files");
    std::string model_path;
    std::vector<std::string> digest_files;
    bool quantized = false;
    digest->add_option("--model", model_path, "model file (or AKASH_MODEL env var)");
    digest->add_option("files", digest_files, "input files")->required();
    digest->add_flag("--quantized", quantized, "8-bit quantized embedding encoding");

    // compare
    auto* compare = app.add_subcommand("compare", "score a pair of files or digests");
    std::vector<std::string> compare_files, compare_digests;
    akash::ThresholdConfig thresholds{0.1, 80};
    compare->add_option("--model", model_path, "model file (or AKASH_MODEL env var)");
    compare->add_option("files", compare_files, "two input files");
    compare->add_option("--digests", compare_digests, "two base64 digest records")->expected(2);
    compare->add_option("--tau-delta", thresholds.tau_delta, "similarity threshold on delta");
    compare->add_option("--tau-uneva", thresholds.tau_uneva, "threshold on uneva distance");

    // fuzz
    auto* fuzz = app.add_subcommand("fuzz", "write a perturbed copy of a file");
    std::string fuzz_in, fuzz_out, perturb_spec;
    std::uint64_t fuzz_seed = 0;
    fuzz->add_option("file", fuzz_in, "input file")->required();
    fuzz->add_option("--perturb", perturb_spec,
                     "bitsub:rho=N | insert:off=N,len=N | delete:off=N,len=N | overlay:len=N | "
                     "truncate:len=N")
        ->required();
    fuzz->add_option("--seed", fuzz_seed, "seed");
    fuzz->add_option("--out", fuzz_out, "output path")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "run the evaluation harness");
    std::string eval_corpus, eval_out = "eval_out", curve_file, ssdeep_path, sdhash_path;
    std::vector<std::string> scenarios;
    std::size_t n_pairs = 200;
    std::uint64_t eval_rho = 250, eval_seed = 0;
    std::uint32_t sahash_tau = 2;
    eval->add_option("--model", model_path, "model file (or AKASH_MODEL env var)");
    eval->add_option("--corpus", eval_corpus, "corpus directory")->required();
    eval->add_option("--out-dir", eval_out, "output directory");
    eval->add_option("--scenarios", scenarios, "perturbation classes: bitsub, insdel");
    eval->add_option("--n-pairs", n_pairs, "random distinct pairs to sample");
    eval->add_option("--rho", eval_rho, "bits substituted in the bitsub scenario");
    eval->add_option("--seed", eval_seed, "seed");
    eval->add_option("--tau-delta", thresholds.tau_delta, "akash similarity threshold");
    eval->add_option("--tau-uneva", thresholds.tau_uneva, "uneva gate threshold");
    eval->add_option("--sahash-tau", sahash_tau, "sahash digest distance threshold");
    eval->add_option("--curve-file", curve_file, "emit a robustness curve for this file");
    eval->add_option("--ssdeep-path", ssdeep_path, "ssdeep executable (optional)");
    eval->add_option("--sdhash-path", sdhash_path, "sdhash executable (optional)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            tc.feature_map = parse_map_kind(map_kind);
            echo_config({{"cmd", "train"}, {"corpus", corpus_dir}, {"out", out_model},
                         {"epochs", tc.epochs}, {"batch_size", tc.batch_size},
                         {"lr", tc.learning_rate}, {"keep_prob", tc.keep_prob}, {"s", tc.s},
                         {"E", tc.E}, {"rho_max", tc.rho_max}, {"seed", tc.master_seed},
                         {"map", map_kind}, {"shift_bits", tc.shift_bits},
                         {"share_bank", tc.share_bank}, {"size_cap", size_cap}});
            return cmd_train(corpus_dir, out_model, tc, size_cap, loss_csv);
        }
        if (*digest) {
            return cmd_digest(default_model_path(model_path), digest_files, quantized);
        }
        if (*compare) {
            echo_config({{"cmd", "compare"}, {"tau_delta", thresholds.tau_delta},
                         {"tau_uneva", thresholds.tau_uneva}});
            std::string mp = compare_digests.size() == 2 ? "" : default_model_path(model_path);
            return cmd_compare(mp, compare_files, compare_digests, thresholds);
        }
        if (*fuzz) {
            echo_config({{"cmd", "fuzz"}, {"perturb", perturb_spec}, {"seed", fuzz_seed}});
            return cmd_fuzz(fuzz_in, perturb_spec, fuzz_seed, fuzz_out);
        }
        if (*eval) {
            echo_config({{"cmd", "eval"}, {"corpus", eval_corpus}, {"out", eval_out},
                         {"scenarios", scenarios}, {"n_pairs", n_pairs}, {"rho", eval_rho},
                         {"seed", eval_seed}, {"tau_delta", thresholds.tau_delta},
                         {"tau_uneva", thresholds.tau_uneva}, {"sahash_tau", sahash_tau}});
            return cmd_eval(default_model_path(model_path), eval_corpus, eval_out, scenarios,
                            n_pairs, eval_rho, eval_seed, thresholds, sahash_tau, curve_file,
                            ssdeep_path, sdhash_path);
        }
    } catch (const akash::NumericsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
