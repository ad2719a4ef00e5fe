#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcut/errors.hpp"
#include "bcut/harness.hpp"

namespace fs = std::filesystem;
using namespace bcut;

namespace {

enum ExitCode { kOk = 0, kInvalid = 2, kFailed = 3, kIo = 4 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<std::size_t> n;
    std::optional<double> lambda;
    std::optional<double> kappa;
    std::string mode;
    std::string input;
    std::string model;
    std::string dmp;
};

ExperimentConfig resolve_config(const Options& o) {
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (o.seed) {
        c.master_seed = *o.seed;
    }
    if (!o.out_dir.empty()) {
        c.output_dir = o.out_dir;
    }
    if (o.lambda) {
        c.classifier.train.lambda = *o.lambda;
    }
    if (o.kappa) {
        c.controller.kappa = *o.kappa;
    }
    c.validate();
    return c;
}

fs::path out_path(const ExperimentConfig& c, const std::string& name) {
    std::error_code ec;
    fs::create_directories(c.output_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + c.output_dir + "': " + ec.message());
    }
    return fs::path(c.output_dir) / name;
}

// Resolves an input file: explicit path first, else the default artifact in the output directory.
fs::path in_path(const ExperimentConfig& c, const std::string& given, const std::string& fallback) {
    return given.empty() ? fs::path(c.output_dir) / fallback : fs::path(given);
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw IoError("cannot open '" + p.string() + "'");
    }
    return in;
}

template <typename Writer>
void write_file(const fs::path& p, Writer&& write) {
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + p.string() + "'");
    }
    write(out);
    out.flush();
    if (!out) {
        throw IoError("write to '" + p.string() + "' failed");
    }
}

nlohmann::ordered_json read_json(const fs::path& p) {
    auto in = open_in(p);
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("'" + p.string() + "' is not valid JSON: " + e.what());
    }
}

Pipeline pipeline_for(const ExperimentConfig& c, const Options& o) {
    if (o.dmp.empty()) {
        return make_pipeline(c);
    }
    return make_pipeline(c, dmp_from_json(read_json(o.dmp)));
}

std::vector<TorqueTrace> load_dataset(const ExperimentConfig& c, const Options& o) {
    auto in = open_in(in_path(c, o.input, "dataset.csv"));
    const auto records = read_trial_csv(in, c.snapshots);
    return traces_from_records(records, c.snapshots);
}

std::size_t joints_of(const ExperimentConfig& c) {
    return c.arm.link_lengths.size();
}

int cmd_demo_gen(const Options& o) {
    const auto c = resolve_config(o);
    const auto demo = demo_gen(c);
    const auto p = out_path(c, "demo.csv");
    write_file(p, [&](std::ostream& out) { write_demo_csv(out, demo); });
    std::cout << "demo: " << demo.points.size() << " samples over " << demo.duration() << " s -> " << p.string()
              << '\n';
    return kOk;
}

int cmd_fit_dmp(const Options& o) {
    const auto c = resolve_config(o);
    Trajectory demo;
    if (o.input.empty() && !fs::exists(fs::path(c.output_dir) / "demo.csv")) {
        demo = demo_gen(c);
    } else {
        auto in = open_in(in_path(c, o.input, "demo.csv"));
        demo = read_demo_csv(in);
    }
    const Dmp dmp = fit_dmp(demo, c.dmp);
    for (const auto& w : dmp.warnings()) {
        std::cerr << "warning: " << w << '\n';
    }
    const auto p = out_path(c, "dmp.json");
    write_file(p, [&](std::ostream& out) { out << to_json(dmp).dump(2) << '\n'; });
    std::cout << "dmp: " << dmp.dims() << " dims, " << dmp.basis().size() << " basis functions, tau " << dmp.tau()
              << " s -> " << p.string() << '\n';
    return kOk;
}

int cmd_collect(const Options& o) {
    auto c = resolve_config(o);
    if (o.n) {
        c.n_trials = *o.n;
    }
    const auto pipeline = pipeline_for(c, o);
    const auto result = collect(c, pipeline);

    std::vector<TrialRecord> kept;
    for (const auto& r : result.records) {
        if (!r.truncated && r.steps() == c.snapshots && r.outcome != Outcome::IncompleteExtraction) {
            kept.push_back(r);
        }
    }
    write_file(out_path(c, "trials_collect.csv"),
               [&](std::ostream& out) { write_trial_csv(out, result.records, joints_of(c)); });
    write_file(out_path(c, "dataset.csv"), [&](std::ostream& out) { write_trial_csv(out, kept, joints_of(c)); });

    const std::size_t peel = result.stuck;
    const std::size_t labeled = result.traces.size();
    std::cout << "collect: " << c.n_trials << " trials, " << result.successes << " success, " << result.stuck
              << " stuck, " << result.incomplete << " incomplete\n";
    std::cout << "dataset: " << labeled << " traces kept (" << result.excluded << " excluded), peel share "
              << (labeled == 0 ? 0.0 : static_cast<double>(peel) / static_cast<double>(labeled)) << '\n';
    return kOk;
}

void print_metrics(const char* name, const Metrics& m) {
    std::printf("%s: sensitivity %.2f specificity %.2f misclassification %.0f%% (tp %ld fn %ld fp %ld tn %ld)\n", name,
                m.sensitivity_2dp, m.specificity_2dp, m.misclassification_2dp * 100.0, m.counts.tp, m.counts.fn,
                m.counts.fp, m.counts.tn);
}

int cmd_train_clf(const Options& o) {
    const auto c = resolve_config(o);
    const auto traces = load_dataset(c, o);
    const auto result = train_clf(traces, c);

    write_file(out_path(c, "model.json"), [&](std::ostream& out) { out << to_json(result.model).dump(2) << '\n'; });
    nlohmann::ordered_json metrics;
    metrics["cross_validation"] = to_json(result.cv.pooled);
    metrics["test"] = to_json(result.test);
    metrics["train_trials"] = result.train_ids;
    metrics["test_trials"] = result.test_ids;
    write_file(out_path(c, "metrics.json"), [&](std::ostream& out) { out << metrics.dump(2) << '\n'; });

    std::cout << "train-clf: " << result.train_ids.size() << " training traces, " << result.test_ids.size()
              << " held out\n";
    print_metrics("cross-validation", result.cv.pooled);
    print_metrics("test", result.test);
    return kOk;
}

int cmd_eval_clf(const Options& o) {
    const auto c = resolve_config(o);
    const auto model = model_from_json(read_json(in_path(c, o.model, "model.json")));
    const auto traces = load_dataset(c, o);
    const auto m = metrics_from_confusion(evaluate(model, flatten(traces)));
    write_file(out_path(c, "metrics_eval.json"), [&](std::ostream& out) { out << to_json(m).dump(2) << '\n'; });
    print_metrics("eval", m);
    return kOk;
}

int cmd_compare(const Options& o) {
    auto c = resolve_config(o);
    if (o.n) {
        c.n_compare = *o.n;
    }
    std::vector<Mode> modes{Mode::OpenLoop, Mode::ClosedLoop};
    if (!o.mode.empty()) {
        modes = {parse_mode(o.mode)};
    }
    const auto pipeline = pipeline_for(c, o);

    RunSummary summary;
    LogisticModel model;
    if (!o.model.empty()) {
        model = model_from_json(read_json(o.model));
    } else {
        // No model given: collect and train in-process with the same config.
        const auto collected = collect(c, pipeline);
        const auto trained = train_clf(collected.traces, c);
        model = trained.model;
        summary.classifier = trained.test;
    }
    auto result = compare(c, pipeline, model_estimator(model), modes);
    summary.modes = result.summary.modes;

    if (!result.open.empty()) {
        write_file(out_path(c, "compare_open.csv"),
                   [&](std::ostream& out) { write_trial_csv(out, result.open, joints_of(c)); });
        summary.artifacts.push_back("compare_open.csv");
    }
    if (!result.closed.empty()) {
        write_file(out_path(c, "compare_closed.csv"),
                   [&](std::ostream& out) { write_trial_csv(out, result.closed, joints_of(c)); });
        summary.artifacts.push_back("compare_closed.csv");
    }
    summary.artifacts.push_back("summary.csv");
    summary.artifacts.push_back("summary.json");
    write_file(out_path(c, "summary.csv"), [&](std::ostream& out) { write_summary_csv(out, summary); });
    write_file(out_path(c, "summary.json"), [&](std::ostream& out) { out << to_json(summary).dump(2) << '\n'; });

    for (const auto& m : summary.modes) {
        std::printf("%-6s %zu trials: %zu success (%.1f%%), %zu stuck, %zu incomplete\n", to_string(m.mode), m.trials,
                    m.successful, m.success_rate * 100.0, m.stuck, m.incomplete);
    }
    if (summary.classifier) {
        print_metrics("classifier test", *summary.classifier);
    }
    return kOk;
}

int cmd_stats(const Options& o) {
    const auto c = resolve_config(o);
    const auto traces = load_dataset(c, o);
    const auto rows = stats(traces, joints_of(c), c.snapshots);
    const auto p = out_path(c, "stats.csv");
    write_file(p, [&](std::ostream& out) { write_stats_csv(out, rows); });
    std::cout << "stats: " << rows.size() << " rows from " << traces.size() << " traces -> " << p.string() << '\n';
    return kOk;
}

int cmd_replay(const Options& o) {
    const auto c = resolve_config(o);
    if (o.input.empty()) {
        throw InvalidArgument("replay needs --input <trial csv>");
    }
    auto in = open_in(o.input);
    const auto records = read_trial_csv(in, c.snapshots);
    const auto results = replay(c, records);
    std::size_t mismatches = 0;
    for (const auto& r : results) {
        if (r.stored != r.rejudged) {
            ++mismatches;
            std::cout << "trial " << r.trial_id << " (" << to_string(r.mode) << "): stored " << to_string(r.stored)
                      << ", re-judged " << to_string(r.rejudged) << '\n';
        }
    }
    std::cout << "replay: " << results.size() - mismatches << "/" << results.size() << " outcomes agree\n";
    return mismatches == 0 ? kOk : kFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated boundary cutting: DMP nominal path, torque-based medium classifier, feedback correction"};
    app.require_subcommand(1);

    Options o;
    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "experiment config JSON (defaults when omitted)");
        sub->add_option("--seed", o.seed, "override master_seed");
        sub->add_option("--out", o.out_dir, "output directory");
    };

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const std::vector<Entry> entries{
        {"demo-gen", "write the scripted demonstration", cmd_demo_gen},
        {"fit-dmp", "fit the movement primitive to a demonstration", cmd_fit_dmp},
        {"collect", "open-loop data collection over randomized worlds", cmd_collect},
        {"train-clf", "split, cross-validate and train the medium classifier", cmd_train_clf},
        {"eval-clf", "evaluate a stored classifier on a dataset", cmd_eval_clf},
        {"compare", "paired open-loop vs closed-loop trials", cmd_compare},
        {"stats", "per-joint torque statistics by time index and label", cmd_stats},
        {"replay", "re-judge the outcomes stored in a trial CSV", cmd_replay},
    };

    std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        add_common(sub);
        const std::string name = e.name;
        if (name == "collect" || name == "compare") {
            sub->add_option("--n", o.n, "number of trials (per mode for compare)")->check(CLI::PositiveNumber);
            sub->add_option("--dmp", o.dmp, "fitted DMP JSON (refit from the demo when omitted)");
        }
        if (name == "train-clf" || name == "compare") {
            sub->add_option("--lambda", o.lambda, "L2 regularization strength")->check(CLI::NonNegativeNumber);
        }
        if (name == "compare") {
            sub->add_option("--kappa", o.kappa, "correction gain in m")->check(CLI::NonNegativeNumber);
            sub->add_option("--mode", o.mode, "run only one mode")->check(CLI::IsMember({"open", "closed"}));
            sub->add_option("--model", o.model, "classifier JSON (collect and train in-process when omitted)");
        }
        if (name == "eval-clf") {
            sub->add_option("--model", o.model, "classifier JSON (default <out>/model.json)");
        }
        if (name == "replay") {
            sub->add_option("--input", o.input, "trial CSV")->required();
        } else if (name != "demo-gen" && name != "collect" && name != "compare") {
            sub->add_option("--input", o.input, "input file (default: the matching artifact in <out>)");
        }
        subs.emplace_back(sub, e.run);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalid;
    }

    try {
        for (const auto& [sub, run] : subs) {
            if (sub->parsed()) {
                return run(o);
            }
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        // Convergence failures, aborted trials and anything else that stops a run.
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kOk;
}
