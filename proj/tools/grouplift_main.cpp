#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "grouplift/checkpoint.hpp"
#include "grouplift/config.hpp"
#include "grouplift/data.hpp"
#include "grouplift/errors.hpp"
#include "grouplift/gradcheck.hpp"
#include "grouplift/grouping.hpp"
#include "grouplift/mmd.hpp"
#include "grouplift/multilabel.hpp"
#include "grouplift/rng.hpp"
#include "grouplift/transfer.hpp"

namespace {

using namespace grouplift;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += num(v[i]);
    }
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << body;
    out.flush();
    if (!out) throw data_error("write to '" + path + "' failed");
}

// Attributes are addressed by name, or by position as a fallback.
std::size_t resolve_attribute(const std::vector<std::string>& names,
                              const std::string& token,
                              const std::string& what) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == token) return i;
    }
    const bool digits =
        !token.empty() && token.size() <= 9 &&
        std::all_of(token.begin(), token.end(),
                    [](unsigned char c) { return std::isdigit(c) != 0; });
    if (digits) {
        const std::size_t idx = std::stoul(token);
        if (idx < names.size()) return idx;
    }
    throw argument_error(what + " '" + token + "' does not name an attribute");
}

LabelMatrix label_column(const LabelMatrix& all, std::size_t attribute) {
    LabelMatrix one(all.samples, 1);
    for (std::size_t n = 0; n < all.samples; ++n) {
        one.at(n, 0) = all.at(n, attribute);
    }
    return one;
}

std::vector<double> uniform_coefficients(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

MmdEstimator parse_estimator(const std::string& s) {
    return s == "unbiased" ? MmdEstimator::Unbiased : MmdEstimator::Biased;
}

LoadedCsv load_labeled_csv(const std::string& path) {
    LoadedCsv data = load_csv(path);
    if (!data.has_labels()) {
        throw data_error("'" + path + "' has no attribute columns");
    }
    return data;
}

KernelFamily explicit_family(const std::vector<double>& bandwidths,
                             const std::vector<double>& coefficients) {
    KernelFamily fam;
    fam.bandwidths = bandwidths;
    fam.coefficients = coefficients.empty()
                           ? uniform_coefficients(bandwidths.size())
                           : coefficients;
    validate(fam);
    return fam;
}

// ---------------------------------------------------------------- gen-data

struct GenDataOpts {
    SyntheticSpec spec;
    long long shift_dims = -1;
    std::string source_out;
    std::string target_out;
    std::string grouping_out;
    bool no_target_labels = false;
    std::vector<double> split_fractions;
};

void run_gen_data(const GenDataOpts& o) {
    SyntheticSpec spec = o.spec;
    if (o.shift_dims >= 0) {
        spec.shift_dims = static_cast<std::size_t>(o.shift_dims);
    }
    const SyntheticData data = generate(spec);

    save_csv(o.source_out, data.source.features, &data.source.labels,
             &data.source.attribute_names);
    std::cout << "wrote " << o.source_out << ": "
              << data.source.features.rows() << " rows, "
              << data.source.features.cols() << " features, "
              << data.source.labels.attributes << " attributes\n";

    const bool keep = !o.no_target_labels;
    save_csv(o.target_out, data.target.features,
             keep ? &data.target.eval_labels : nullptr,
             keep ? &data.target.attribute_names : nullptr);
    std::cout << "wrote " << o.target_out << ": "
              << data.target.features.rows() << " rows, "
              << data.target.features.cols() << " features, "
              << (keep ? "labels kept for evaluation only" : "no labels")
              << "\n";

    if (!o.grouping_out.empty()) {
        const std::vector<double> weights = group_loss_weights(data.planted);
        save_grouping(o.grouping_out, data.planted, data.source.attribute_names,
                      &weights);
        std::cout << "wrote " << o.grouping_out << ": "
                  << data.planted.group_count << " groups\n";
    }

    if (!o.split_fractions.empty()) {
        const std::vector<LabeledDomain> parts =
            split(data.source, o.split_fractions, spec.seed);
        std::string stem = o.source_out;
        if (stem.size() > 4 && stem.ends_with(".csv")) {
            stem.resize(stem.size() - 4);
        }
        static const char* kThree[] = {"train", "val", "test"};
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const std::string tag = parts.size() == 3
                                        ? std::string(kThree[i])
                                        : "part" + std::to_string(i);
            const std::string path = stem + "." + tag + ".csv";
            save_csv(path, parts[i].features, &parts[i].labels,
                     &parts[i].attribute_names);
            std::cout << "wrote " << path << ": " << parts[i].features.rows()
                      << " rows\n";
        }
    }
}

// ------------------------------------------------------------------- group

struct GroupOpts {
    std::string data_path;
    std::size_t groups = 1;
    std::string weights = "grouped";
    long long focus_group = -1;
    double off_weight = 0.1;
    std::string out;
    std::string correlation_out;
};

void run_group(const GroupOpts& o) {
    const LoadedCsv data = load_labeled_csv(o.data_path);
    const Matrix corr = label_correlation(data.labels);
    const AttributeGrouping grouping = cluster_attributes(corr, o.groups);

    std::vector<double> weights;
    if (o.weights == "equal") {
        weights = equal_loss_weights(grouping.attribute_count());
    } else if (o.weights == "grouped") {
        weights = group_loss_weights(grouping);
    } else {
        if (o.focus_group < 0) {
            throw argument_error("--weights emphasized requires --focus-group");
        }
        weights = emphasized_loss_weights(
            grouping, static_cast<std::size_t>(o.focus_group), o.off_weight);
    }

    save_grouping(o.out, grouping, data.attribute_names, &weights);

    for (std::size_t g = 0; g < grouping.group_count; ++g) {
        std::cout << "group " << g << ":";
        for (std::size_t i : grouping.members[g]) {
            std::cout << ' ' << data.attribute_names[i];
        }
        std::cout << '\n';
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        std::cout << "weight " << data.attribute_names[i] << ": "
                  << num(weights[i]) << '\n';
    }
    std::cout << "wrote " << o.out << '\n';

    if (!o.correlation_out.empty()) {
        std::string csv = "attribute";
        for (const std::string& n : data.attribute_names) csv += "," + n;
        csv += '\n';
        for (std::size_t r = 0; r < corr.rows(); ++r) {
            csv += data.attribute_names[r];
            for (std::size_t c = 0; c < corr.cols(); ++c) {
                csv += ',';
                csv += num(corr(r, c));
            }
            csv += '\n';
        }
        write_text(o.correlation_out, csv);
        std::cout << "wrote " << o.correlation_out << '\n';
    }
}

// -------------------------------------------------------------- train-mnet

struct TrainOpts {
    std::string data_path;
    std::string grouping_path;
    std::string weights = "auto";
    long long focus_group = -1;
    double off_weight = 0.1;
    std::vector<std::size_t> trunk = {16, 8};
    std::vector<std::size_t> head = {8};
    TrainConfig cfg;
    std::string out;
    std::string metrics;
};

std::vector<double> resolve_weights(const TrainOpts& o,
                                    const std::optional<LoadedGrouping>& loaded,
                                    std::size_t attributes) {
    if (o.weights == "equal") return equal_loss_weights(attributes);
    if (o.weights == "grouped") {
        if (!loaded) throw argument_error("--weights grouped requires --grouping");
        return group_loss_weights(loaded->grouping);
    }
    if (o.weights == "emphasized") {
        if (!loaded) {
            throw argument_error("--weights emphasized requires --grouping");
        }
        if (o.focus_group < 0) {
            throw argument_error("--weights emphasized requires --focus-group");
        }
        return emphasized_loss_weights(
            loaded->grouping, static_cast<std::size_t>(o.focus_group),
            o.off_weight);
    }
    // auto: weights from the grouping file when present, grouped weights
    // when only the grouping is, equal weights otherwise.
    if (loaded && loaded->weights) return *loaded->weights;
    if (loaded) return group_loss_weights(loaded->grouping);
    return equal_loss_weights(attributes);
}

void run_train_mnet(const TrainOpts& o) {
    const LoadedCsv data = load_labeled_csv(o.data_path);

    std::optional<LoadedGrouping> loaded;
    if (!o.grouping_path.empty()) {
        loaded = load_grouping(o.grouping_path, data.attribute_names);
    }

    Rng rng(o.cfg.seed);
    MultiLabelModel model = make_multilabel_model(
        data.features.cols(), o.trunk, o.head, data.attribute_names, rng);
    model.loss_weights = resolve_weights(o, loaded, data.labels.attributes);

    const std::vector<EpochMetrics> history =
        train_mnet(model, data.features, data.labels, o.cfg);

    double final_loss = 0.0;
    std::vector<double> final_acc;
    if (!history.empty()) {
        final_loss = history.back().total_loss;
        final_acc = history.back().accuracy;
    } else {
        final_loss = multilabel_loss(model, data.features, data.labels).total;
        final_acc =
            per_attribute_accuracy(predict(model, data.features), data.labels);
    }

    if (!o.metrics.empty()) {
        std::string csv = "epoch,total_loss";
        for (const std::string& n : data.attribute_names) csv += ",acc:" + n;
        csv += '\n';
        for (const EpochMetrics& em : history) {
            csv += std::to_string(em.epoch);
            csv += ',';
            csv += num(em.total_loss);
            for (double a : em.accuracy) {
                csv += ',';
                csv += num(a);
            }
            csv += '\n';
        }
        write_text(o.metrics, csv);
    }

    save_checkpoint(o.out, {model, o.cfg.seed, config_hash(o.cfg)});

    std::cout << "trained " << model.attribute_count() << " attributes for "
              << o.cfg.epochs << " epochs\n"
              << "final loss: " << num(final_loss) << '\n';
    double mean = 0.0;
    for (std::size_t i = 0; i < final_acc.size(); ++i) {
        std::cout << "accuracy " << data.attribute_names[i] << ": "
                  << num(final_acc[i]) << '\n';
        mean += final_acc[i];
    }
    std::cout << "mean accuracy: "
              << num(mean / static_cast<double>(final_acc.size())) << '\n';
    if (!o.metrics.empty()) std::cout << "wrote " << o.metrics << '\n';
    std::cout << "wrote " << o.out << '\n';
}

// ---------------------------------------------------------------- transfer

struct TransferOpts {
    std::string model_path;
    std::string source_path;
    std::string target_path;
    std::string source_attr;
    std::string target_attr;
    double alpha = kSameGroupAlpha;
    std::string alpha_policy = "fixed";
    std::string grouping_path;
    long long freeze = -1;
    std::vector<std::size_t> mmd_layers;
    std::vector<double> scales;
    std::vector<double> bandwidths;
    std::vector<double> coefficients;
    std::string estimator = "biased";
    std::vector<double> term_weights;
    TrainConfig cfg{.epochs = 40, .batch_size = 32, .learning_rate = 0.05,
                    .seed = 0};
    std::string sweep;
    std::string metrics;
    std::string report_path;
    std::string out;
    std::string dump_embeddings;
    bool alpha_given = false;
};

std::vector<std::uint64_t> parse_sweep(const std::string& s) {
    const std::string_view prefix = "seeds=";
    const std::size_t dots = s.find("..");
    auto bad = [&] {
        return argument_error("--sweep expects seeds=<first>..<last>, got '" +
                              s + "'");
    };
    if (s.rfind(prefix, 0) != 0 || dots == std::string::npos ||
        dots < prefix.size()) {
        throw bad();
    }
    const std::string a = s.substr(prefix.size(), dots - prefix.size());
    const std::string b = s.substr(dots + 2);
    auto parse_u64 = [&](const std::string& t) {
        if (t.empty() || t.size() > 18 ||
            !std::all_of(t.begin(), t.end(), [](unsigned char c) {
                return std::isdigit(c) != 0;
            })) {
            throw bad();
        }
        return static_cast<std::uint64_t>(std::stoull(t));
    };
    const std::uint64_t first = parse_u64(a);
    const std::uint64_t last = parse_u64(b);
    if (last < first) throw argument_error("--sweep range is empty");
    if (last - first >= 10000) throw argument_error("--sweep range is too large");
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t v = first; v <= last; ++v) seeds.push_back(v);
    return seeds;
}

struct SeedRun {
    std::uint64_t seed = 0;
    TransferOutcome outcome;
    std::vector<double> epoch_accuracy;
    double direct = 0.0;
    double adapted = 0.0;
};

void run_transfer(const TransferOpts& o) {
    const Checkpoint ckpt = load_checkpoint(o.model_path);
    const LoadedCsv src = load_labeled_csv(o.source_path);
    const LoadedCsv tgt = load_csv(o.target_path);

    const std::size_t src_head = resolve_attribute(
        ckpt.model.attribute_names, o.source_attr, "source attribute");
    const std::string src_name = ckpt.model.attribute_names[src_head];
    const std::string tgt_token =
        o.target_attr.empty() ? src_name : o.target_attr;
    const std::size_t src_col =
        resolve_attribute(src.attribute_names, src_name, "source attribute");

    double alpha = o.alpha;
    if (o.alpha_policy == "grouped") {
        if (o.alpha_given) {
            throw argument_error("--alpha conflicts with --alpha-policy grouped");
        }
        if (o.grouping_path.empty()) {
            throw argument_error("--alpha-policy grouped requires --grouping");
        }
        const LoadedGrouping g =
            load_grouping(o.grouping_path, ckpt.model.attribute_names);
        const std::size_t tgt_idx = resolve_attribute(
            ckpt.model.attribute_names, tgt_token, "target attribute");
        alpha = alpha_for_groups(g.grouping, src_head, tgt_idx);
    }

    const bool scored = tgt.has_labels();
    std::size_t tgt_col = 0;
    if (scored) {
        tgt_col =
            resolve_attribute(tgt.attribute_names, tgt_token, "target attribute");
    }

    TransferTask task;
    task.source_features = src.features;
    task.source_labels = label_column(src.labels, src_col);
    task.target_features = tgt.features;
    task.mmd_layers = o.mmd_layers;
    task.alpha = alpha;
    if (!o.bandwidths.empty()) {
        task.kernels = explicit_family(o.bandwidths, o.coefficients);
    } else if (!o.coefficients.empty()) {
        throw argument_error("--coefficients requires --bandwidths");
    }
    task.kernel_scales = o.scales;
    task.mmd_term_weights = o.term_weights;
    task.freeze_depth = o.freeze >= 0
                            ? static_cast<std::size_t>(o.freeze)
                            : ckpt.model.trunk.layers.size() / 2;
    task.estimator = parse_estimator(o.estimator);

    std::vector<std::uint64_t> seeds;
    if (o.sweep.empty()) {
        seeds = {o.cfg.seed};
    } else {
        seeds = parse_sweep(o.sweep);
        if (!o.out.empty()) {
            throw argument_error("--out needs a single seed, not --sweep");
        }
        if (!o.dump_embeddings.empty()) {
            throw argument_error(
                "--dump-embeddings needs a single seed, not --sweep");
        }
    }

    auto run_one = [&](std::uint64_t seed) {
        SeedRun r;
        r.seed = seed;
        TrainConfig cfg = o.cfg;
        cfg.seed = seed;
        EpochObserver observer;
        if (scored) {
            observer = [&](const TransferEpoch&, const DenseNetwork& net) {
                r.epoch_accuracy.push_back(
                    binary_accuracy(net, tgt.features, tgt.labels, tgt_col));
            };
        }
        r.outcome = train_tnet(ckpt.model, src_head, task, cfg, observer);
        if (scored) {
            r.direct = direct_transfer_accuracy(ckpt.model, src_head,
                                                tgt.features, tgt.labels,
                                                tgt_col);
            r.adapted = binary_accuracy(r.outcome.adapted.net, tgt.features,
                                        tgt.labels, tgt_col);
        }
        return r;
    };

    std::vector<SeedRun> runs(seeds.size());
    if (seeds.size() == 1) {
        runs[0] = run_one(seeds[0]);
    } else {
        std::vector<std::exception_ptr> errors(seeds.size());
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::min<std::size_t>(
            seeds.size(),
            std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
                    try {
                        runs[i] = run_one(seeds[i]);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& t : pool) t.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const TransferOutcome& first = runs.front().outcome;

    std::string report;
    report += "transfer report\n";
    report += "model: " + o.model_path + "\n";
    report += "source attribute: " + src_name + "\n";
    report += "target attribute: " + tgt_token + "\n";
    report += "alpha: " + num(alpha) + "\n";
    report += "alpha policy: " + o.alpha_policy + "\n";
    report += "estimator: " + o.estimator + "\n";
    report += "freeze depth: " + std::to_string(task.freeze_depth) + "\n";
    report += "mmd layers: " + join(first.mmd_layers) + "\n";
    for (std::size_t t = 0; t < first.families.size(); ++t) {
        report += "layer " + std::to_string(first.mmd_layers[t]) +
                  " bandwidths: " + join(first.families[t].bandwidths) + "\n";
    }
    report += "epochs: " + std::to_string(o.cfg.epochs) + "\n";
    report += "batch: " + std::to_string(o.cfg.batch_size) + "\n";
    report += "lr: " + num(o.cfg.learning_rate) + "\n";
    double mean_direct = 0.0, mean_adapted = 0.0;
    for (const SeedRun& r : runs) {
        report += "seed " + std::to_string(r.seed) + ":";
        if (!r.outcome.history.empty()) {
            report += " total " + num(r.outcome.history.back().total);
            report +=
                " source_loss " + num(r.outcome.history.back().source_loss);
        }
        if (scored) {
            report += " direct " + num(r.direct);
            report += " adapted " + num(r.adapted);
            report += " gain " + num(r.adapted - r.direct);
            mean_direct += r.direct;
            mean_adapted += r.adapted;
        } else {
            report += " target_accuracy n/a";
        }
        report += "\n";
    }
    if (scored) {
        const double n = static_cast<double>(runs.size());
        report += "mean: direct " + num(mean_direct / n) + " adapted " +
                  num(mean_adapted / n) + " gain " +
                  num((mean_adapted - mean_direct) / n) + "\n";
    }
    std::cout << report;
    if (!o.report_path.empty()) {
        write_text(o.report_path, report);
        std::cout << "wrote " << o.report_path << '\n';
    }

    if (!o.metrics.empty()) {
        std::string csv = "seed,epoch,total,source_loss";
        for (std::size_t tap : first.mmd_layers) {
            csv += ",mmd:" + std::to_string(tap);
        }
        csv += ",target_accuracy\n";
        for (const SeedRun& r : runs) {
            for (std::size_t e = 0; e < r.outcome.history.size(); ++e) {
                const TransferEpoch& em = r.outcome.history[e];
                csv += std::to_string(r.seed);
                csv += ',';
                csv += std::to_string(em.epoch);
                csv += ',';
                csv += num(em.total);
                csv += ',';
                csv += num(em.source_loss);
                for (double m : em.mmd_terms) {
                    csv += ',';
                    csv += num(m);
                }
                csv += ',';
                if (scored) csv += num(r.epoch_accuracy[e]);
                csv += '\n';
            }
        }
        write_text(o.metrics, csv);
        std::cout << "wrote " << o.metrics << '\n';
    }

    if (!o.out.empty()) {
        const MultiLabelModel adapted =
            to_single_head_model(runs[0].outcome.adapted, tgt_token);
        TrainConfig cfg = o.cfg;
        cfg.seed = seeds[0];
        save_checkpoint(o.out, {adapted, cfg.seed, config_hash(cfg)});
        std::cout << "wrote " << o.out << '\n';
    }

    if (!o.dump_embeddings.empty()) {
        const SingleAttributeNetwork before =
            single_attribute_network(ckpt.model, src_head);
        const DenseNetwork& after = runs[0].outcome.adapted.net;
        std::size_t files = 0;
        for (const auto& [label, net] :
             {std::pair<const char*, const DenseNetwork*>{"before", &before.net},
              {"after", &after}}) {
            const ForwardTrace src_trace = forward(*net, src.features);
            const ForwardTrace tgt_trace = forward(*net, tgt.features);
            for (std::size_t tap : first.mmd_layers) {
                const std::string base = o.dump_embeddings + "." + label +
                                         ".layer" + std::to_string(tap);
                save_csv(base + ".source.csv", src_trace.activations[tap],
                         nullptr, nullptr);
                save_csv(base + ".target.csv", tgt_trace.activations[tap],
                         nullptr, nullptr);
                files += 2;
            }
        }
        std::cout << "wrote " << files << " embedding files ("
                  << o.dump_embeddings << ".*)\n";
    }
}

// --------------------------------------------------------------------- mmd

struct MmdOpts {
    std::string source;
    std::string target;
    std::string estimator = "biased";
    std::vector<double> scales;
    std::vector<double> bandwidths;
    std::vector<double> coefficients;
    std::string out;
};

void run_mmd(const MmdOpts& o) {
    const LoadedCsv a = load_csv(o.source);
    const LoadedCsv b = load_csv(o.target);

    KernelFamily fam;
    if (!o.bandwidths.empty()) {
        fam = explicit_family(o.bandwidths, o.coefficients);
    } else {
        if (!o.coefficients.empty()) {
            throw argument_error("--coefficients requires --bandwidths");
        }
        fam = median_bandwidths(
            a.features, b.features,
            o.scales.empty() ? default_kernel_scales() : o.scales);
    }

    const MmdResult r =
        mmd_squared(a.features, b.features, fam, parse_estimator(o.estimator));

    std::string report;
    report += "mmd report\n";
    report += "estimator: " + o.estimator + "\n";
    report += "source: " + o.source + " (" +
              std::to_string(a.features.rows()) + " rows, " +
              std::to_string(a.features.cols()) + " features)\n";
    report += "target: " + o.target + " (" +
              std::to_string(b.features.rows()) + " rows, " +
              std::to_string(b.features.cols()) + " features)\n";
    report += "bandwidths: " + join(fam.bandwidths) + "\n";
    report += "coefficients: " + join(fam.coefficients) + "\n";
    report += "per-kernel: " + join(r.per_kernel) + "\n";
    report += "value: " + num(r.value) + "\n";

    std::cout << report;
    if (!o.out.empty()) {
        write_text(o.out, report);
        std::cout << "wrote " << o.out << '\n';
    }
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
    std::string data_path;
    std::vector<std::string> models;
    std::string out;
};

void run_eval(const EvalOpts& o) {
    const LoadedCsv data = load_labeled_csv(o.data_path);

    std::vector<Checkpoint> loaded;
    loaded.reserve(o.models.size());
    for (const std::string& path : o.models) {
        loaded.push_back(load_checkpoint(path));
    }

    // Rows: every attribute any model carries, in first-seen order.
    std::vector<std::string> rows;
    for (const Checkpoint& c : loaded) {
        for (const std::string& n : c.model.attribute_names) {
            if (std::find(rows.begin(), rows.end(), n) == rows.end()) {
                rows.push_back(n);
            }
        }
    }

    // accuracy[m][row]: empty string when model m lacks that attribute.
    std::vector<std::vector<std::string>> cells(
        loaded.size(), std::vector<std::string>(rows.size()));
    std::vector<std::string> means(loaded.size());
    for (std::size_t m = 0; m < loaded.size(); ++m) {
        const MultiLabelModel& model = loaded[m].model;
        LabelMatrix truth(data.labels.samples, model.attribute_count());
        for (std::size_t i = 0; i < model.attribute_count(); ++i) {
            const std::size_t col = resolve_attribute(
                data.attribute_names, model.attribute_names[i],
                "model attribute");
            for (std::size_t n = 0; n < data.labels.samples; ++n) {
                truth.at(n, i) = data.labels.at(n, col);
            }
        }
        const std::vector<double> acc =
            per_attribute_accuracy(predict(model, data.features), truth);
        double mean = 0.0;
        for (std::size_t i = 0; i < acc.size(); ++i) {
            const auto row = std::find(rows.begin(), rows.end(),
                                       model.attribute_names[i]);
            cells[m][static_cast<std::size_t>(row - rows.begin())] =
                num(acc[i]);
            mean += acc[i];
        }
        means[m] = num(mean / static_cast<double>(acc.size()));
    }

    std::string table = "attribute";
    for (const std::string& path : o.models) table += "," + path;
    table += '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        table += rows[r];
        for (std::size_t m = 0; m < loaded.size(); ++m) {
            table += ',';
            table += cells[m][r];
        }
        table += '\n';
    }
    table += "mean";
    for (const std::string& m : means) table += "," + m;
    table += '\n';

    std::cout << table;
    if (!o.out.empty()) {
        write_text(o.out, table);
        std::cout << "wrote " << o.out << '\n';
    }
}

// --------------------------------------------------------------- gradcheck

struct GradOpts {
    std::uint64_t seed = 0;
    std::size_t trials = 20;
    double tolerance = 1e-5;
};

void run_gradcheck(const GradOpts& o) {
    const GradCheckReport report =
        run_gradient_checks(o.seed, o.trials, o.tolerance);
    std::cout << "gradcheck: " << o.trials << " trials per component, tolerance "
              << num(o.tolerance) << '\n';
    for (const GradCheckItem& item : report.items) {
        std::cout << item.component << ": max rel err "
                  << num(item.worst_rel_err) << ' '
                  << (item.pass ? "pass" : "FAIL") << '\n';
    }
    if (!report.all_pass()) {
        throw numeric_error("gradient check failed");
    }
    std::cout << "all gradient checks passed\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Grouped multi-attribute training with unsupervised domain "
        "adaptation"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "Read option defaults from an INI file; explicit flags win");
    app.set_version_flag("--version", "grouplift 1.0");

    GenDataOpts gen;
    CLI::App* g = app.add_subcommand(
        "gen-data", "Generate a synthetic source/target dataset pair");
    g->add_option("--dim", gen.spec.feature_dim, "Feature dimension")
        ->capture_default_str();
    g->add_option("--group-sizes", gen.spec.group_sizes,
                  "Attribute count per group")
        ->delimiter(',');
    g->add_option("--rho-in", gen.spec.rho_in,
                  "Expected label correlation inside a group")
        ->capture_default_str();
    g->add_option("--rho-out", gen.spec.rho_out,
                  "Expected label correlation across groups")
        ->capture_default_str();
    g->add_option("--group-noise", gen.spec.group_noise,
                  "Per-group label noise multipliers (default: all 1)")
        ->delimiter(',');
    g->add_option("--source-samples", gen.spec.source_samples,
                  "Source domain rows")
        ->capture_default_str();
    g->add_option("--target-samples", gen.spec.target_samples,
                  "Target domain rows")
        ->capture_default_str();
    g->add_option("--shift", gen.spec.shift,
                  "Mean shift applied to the target features")
        ->capture_default_str();
    g->add_option("--shift-dims", gen.shift_dims,
                  "Dims receiving the shift; -1 = first half")
        ->capture_default_str();
    g->add_option("--rotation", gen.spec.rotation_deg,
                  "Target rotation in the first feature plane, degrees")
        ->capture_default_str();
    g->add_option("--seed", gen.spec.seed, "Generator seed")
        ->capture_default_str();
    g->add_option("--source-out", gen.source_out, "Source CSV path")
        ->required();
    g->add_option("--target-out", gen.target_out, "Target CSV path")
        ->required();
    g->add_option("--grouping-out", gen.grouping_out,
                  "Write the planted grouping with grouped weights");
    g->add_flag("--no-target-labels", gen.no_target_labels,
                "Omit the evaluation labels from the target CSV");
    g->add_option("--split", gen.split_fractions,
                  "Also split the source rows by these fractions")
        ->delimiter(',');
    g->callback([&] { run_gen_data(gen); });

    GroupOpts grp;
    CLI::App* gr = app.add_subcommand(
        "group", "Cluster attributes by label correlation and derive weights");
    gr->add_option("--data", grp.data_path, "Labeled CSV")->required();
    gr->add_option("--groups", grp.groups, "Number of groups")->required();
    gr->add_option("--weights", grp.weights, "Weighting scheme")
        ->check(CLI::IsMember({"grouped", "equal", "emphasized"}))
        ->capture_default_str();
    gr->add_option("--focus-group", grp.focus_group,
                   "Group kept at weight 1 under emphasized");
    gr->add_option("--off-weight", grp.off_weight,
                   "Weight outside the focus group under emphasized")
        ->capture_default_str();
    gr->add_option("--out", grp.out, "Grouping file path")->required();
    gr->add_option("--correlation-out", grp.correlation_out,
                   "Write the label correlation matrix as CSV");
    gr->callback([&] { run_group(grp); });

    TrainOpts tr;
    CLI::App* t = app.add_subcommand(
        "train-mnet", "Train the shared-trunk multi-attribute model");
    t->add_option("--data", tr.data_path, "Labeled CSV")->required();
    t->add_option("--grouping", tr.grouping_path, "Grouping file");
    t->add_option("--weights", tr.weights, "Loss weighting scheme")
        ->check(CLI::IsMember({"auto", "equal", "grouped", "emphasized"}))
        ->capture_default_str();
    t->add_option("--focus-group", tr.focus_group,
                  "Group kept at weight 1 under emphasized");
    t->add_option("--off-weight", tr.off_weight,
                  "Weight outside the focus group under emphasized")
        ->capture_default_str();
    t->add_option("--trunk", tr.trunk, "Trunk hidden widths")->delimiter(',');
    t->add_option("--head", tr.head, "Head hidden widths")->delimiter(',');
    t->add_option("--epochs", tr.cfg.epochs, "Training epochs")
        ->capture_default_str();
    t->add_option("--batch", tr.cfg.batch_size, "Minibatch size")
        ->capture_default_str();
    t->add_option("--lr", tr.cfg.learning_rate, "Learning rate")
        ->capture_default_str();
    t->add_option("--seed", tr.cfg.seed, "Init and shuffle seed")
        ->capture_default_str();
    t->add_option("--out", tr.out, "Checkpoint path")->required();
    t->add_option("--metrics", tr.metrics, "Per-epoch metrics CSV");
    t->callback([&] { run_train_mnet(tr); });

    TransferOpts tf;
    CLI::App* x = app.add_subcommand(
        "transfer", "Adapt one attribute head to an unlabeled target domain");
    x->add_option("--model", tf.model_path, "Source checkpoint")->required();
    x->add_option("--source-data", tf.source_path, "Labeled source CSV")
        ->required();
    x->add_option("--target-data", tf.target_path,
                  "Target CSV; labels, when present, score only")
        ->required();
    x->add_option("--source-attribute", tf.source_attr,
                  "Attribute whose head is adapted")
        ->required();
    x->add_option("--target-attribute", tf.target_attr,
                  "Target-side attribute; defaults to the source attribute");
    CLI::Option* alpha_opt =
        x->add_option("--alpha", tf.alpha, "Weight on the source loss")
            ->capture_default_str();
    x->add_option("--alpha-policy", tf.alpha_policy,
                  "fixed: use --alpha; grouped: 1.0 same group, 0.1 across")
        ->check(CLI::IsMember({"fixed", "grouped"}))
        ->capture_default_str();
    x->add_option("--grouping", tf.grouping_path, "Grouping file");
    x->add_option("--freeze", tf.freeze,
                  "Layers frozen from the input; -1 = half the trunk")
        ->capture_default_str();
    x->add_option("--mmd-layers", tf.mmd_layers,
                  "Activation indices to match; default: trunk output and "
                  "every head activation")
        ->delimiter(',');
    CLI::Option* scales_opt =
        x->add_option("--scales", tf.scales,
                      "Median-bandwidth scale ladder per layer")
            ->delimiter(',');
    CLI::Option* bw_opt =
        x->add_option("--bandwidths", tf.bandwidths,
                      "Explicit kernel bandwidths for every layer")
            ->delimiter(',');
    x->add_option("--coefficients", tf.coefficients,
                  "Kernel coefficients for --bandwidths; default uniform")
        ->delimiter(',');
    scales_opt->excludes(bw_opt);
    x->add_option("--estimator", tf.estimator, "Discrepancy estimator")
        ->check(CLI::IsMember({"biased", "unbiased"}))
        ->capture_default_str();
    x->add_option("--term-weights", tf.term_weights,
                  "Weight per matched layer; default all ones")
        ->delimiter(',');
    x->add_option("--epochs", tf.cfg.epochs, "Adaptation epochs")
        ->capture_default_str();
    x->add_option("--batch", tf.cfg.batch_size, "Minibatch size")
        ->capture_default_str();
    x->add_option("--lr", tf.cfg.learning_rate, "Learning rate")
        ->capture_default_str();
    x->add_option("--seed", tf.cfg.seed, "Shuffle seed")
        ->capture_default_str();
    x->add_option("--sweep", tf.sweep,
                  "Run seeds=<first>..<last> concurrently and merge reports");
    x->add_option("--metrics", tf.metrics, "Per-epoch metrics CSV");
    x->add_option("--report", tf.report_path, "Write the report here too");
    x->add_option("--out", tf.out, "Adapted checkpoint (single seed)");
    x->add_option("--dump-embeddings", tf.dump_embeddings,
                  "Prefix for before/after activation CSVs (single seed)");
    x->callback([&] {
        tf.alpha_given = alpha_opt->count() > 0;
        run_transfer(tf);
    });

    MmdOpts mm;
    CLI::App* m = app.add_subcommand(
        "mmd", "Kernel discrepancy between two feature CSVs");
    m->add_option("--source", mm.source, "First CSV")->required();
    m->add_option("--target", mm.target, "Second CSV")->required();
    m->add_option("--estimator", mm.estimator, "Discrepancy estimator")
        ->check(CLI::IsMember({"biased", "unbiased"}))
        ->capture_default_str();
    CLI::Option* m_scales =
        m->add_option("--scales", mm.scales, "Median-bandwidth scale ladder")
            ->delimiter(',');
    CLI::Option* m_bw =
        m->add_option("--bandwidths", mm.bandwidths, "Explicit bandwidths")
            ->delimiter(',');
    m->add_option("--coefficients", mm.coefficients,
                  "Coefficients for --bandwidths; default uniform")
        ->delimiter(',');
    m_scales->excludes(m_bw);
    m->add_option("--out", mm.out, "Write the report here too");
    m->callback([&] { run_mmd(mm); });

    EvalOpts ev;
    CLI::App* e = app.add_subcommand(
        "eval", "Per-attribute accuracy of one or more checkpoints");
    e->add_option("--data", ev.data_path, "Labeled CSV")->required();
    e->add_option("--model", ev.models, "Checkpoint; repeat to compare")
        ->required();
    e->add_option("--out", ev.out, "Write the table here too");
    e->callback([&] { run_eval(ev); });

    GradOpts gc;
    CLI::App* c = app.add_subcommand(
        "gradcheck", "Finite-difference audit of every gradient path");
    c->add_option("--seed", gc.seed, "Instance seed")->capture_default_str();
    c->add_option("--trials", gc.trials, "Instances per component")
        ->capture_default_str();
    c->add_option("--tolerance", gc.tolerance, "Max relative error allowed")
        ->capture_default_str();
    c->callback([&] { run_gradcheck(gc); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 1;
    } catch (const argument_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const numeric_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    } catch (const error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
