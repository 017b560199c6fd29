// coreg command-line driver.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "coreg/error.hpp"
#include "coreg/experiment.hpp"
#include "coreg/format.hpp"
#include "coreg/io.hpp"

namespace fs = std::filesystem;
using namespace coreg;

namespace {

struct RunArgs {
    std::string config;
    std::string output;
    std::vector<std::uint64_t> seeds;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
    cmd->add_option("-c,--config", args.config, "experiment config (JSON)")->required();
    cmd->add_option("-o,--output", args.output, "override the output directory");
    cmd->add_option("--seeds", args.seeds, "override the seed list")->delimiter(',');
}

ExperimentConfig load_run_config(const RunArgs& args) {
    ExperimentConfig cfg = load_config(args.config);
    if (!args.output.empty()) cfg.output_dir = args.output;
    if (!args.seeds.empty()) cfg.seeds = args.seeds;
    return cfg;
}

int report(const RunManifest& m, const ExperimentConfig& cfg) {
    const fs::path dir = resolve_output_dir(cfg.output_dir);
    if (m.failed) {
        std::cerr << "run failed: " << m.error << '\n';
    }
    std::cout << "run dir " << dir.string() << " (" << m.rows.size() << " seeds, "
              << fmt_double(m.wall_clock_seconds) << " s)\n";
    if (m.median_dev) std::cout << "median dev f1 " << fmt_double(m.median_dev->f1) << '\n';
    if (m.median_test) std::cout << "median test f1 " << fmt_double(m.median_test->f1) << '\n';
    return m.exit_code;
}

// Label-only datasets let inject-noise reuse the feature-free flip machinery.
Dataset label_dataset(std::size_t num_classes) {
    Dataset d;
    d.num_classes = num_classes;
    return d;
}

void add_label(Dataset& d, int label, int true_label, std::size_t group) {
    Example e;
    e.id = d.examples.size();
    e.label = label;
    e.true_label = true_label;
    e.group = group;
    d.examples.push_back(std::move(e));
}

struct NoiseArgs {
    std::string input, output, mask, format = "features", schema, confusion;
    std::string scheme = "uniform_flip";
    double rate = -1.0;
    std::uint64_t seed = 1;
    std::size_t num_classes = 4;
};

NoiseSpec noise_spec(const NoiseArgs& a, double default_rate) {
    NoiseSpec spec;
    spec.rate = a.rate >= 0.0 ? a.rate : default_rate;
    spec.scheme = parse_noise_scheme(a.scheme);
    spec.seed = a.seed;
    if (!a.confusion.empty()) {
        std::ifstream in(a.confusion);
        if (!in) throw ConfigError("cannot read " + a.confusion);
        try {
            spec.confusion = nlohmann::json::parse(in).get<std::vector<std::vector<double>>>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(a.confusion + ": " + e.what());
        }
    }
    return spec;
}

int inject_noise_cmd(const NoiseArgs& a) {
    NoisyData noisy;
    if (a.format == "features") {
        const Dataset data = read_feature_csv(a.input, a.num_classes);
        noisy = inject_noise(data, noise_spec(a, 0.3));
        write_feature_csv(a.output, noisy.data);
    } else if (a.format == "jsonl") {
        if (a.schema.empty()) throw ConfigError("--schema is required for jsonl input");
        const Schema schema = read_schema(a.schema);
        auto instances = read_relation_jsonl(a.input, schema);
        Dataset d = label_dataset(schema.relation_labels.size());
        for (std::size_t i = 0; i < instances.size(); ++i) {
            add_label(d, instances[i].label, instances[i].true_label, i);
        }
        noisy = inject_noise(d, noise_spec(a, kRelationNoiseRate));
        for (std::size_t i = 0; i < instances.size(); ++i) {
            instances[i].label = noisy.data.examples[i].label;
            instances[i].true_label = noisy.data.examples[i].true_label;
        }
        write_relation_jsonl(a.output, instances, schema);
    } else if (a.format == "conll") {
        if (a.schema.empty()) throw ConfigError("--schema is required for conll input");
        const TagSet tags = read_schema(a.schema).tag_set();
        auto sentences = read_conll(a.input, tags);
        Dataset d = label_dataset(tags.size());
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            const auto& sent = sentences[s];
            for (std::size_t t = 0; t < sent.tags.size(); ++t) {
                add_label(d, sent.tags[t], sent.true_tags.empty() ? -1 : sent.true_tags[t], s);
            }
        }
        noisy = inject_noise(d, noise_spec(a, kTaggingNoiseRate));
        std::size_t k = 0;
        for (auto& sent : sentences) {
            sent.true_tags.resize(sent.tags.size());
            for (std::size_t t = 0; t < sent.tags.size(); ++t, ++k) {
                sent.tags[t] = noisy.data.examples[k].label;
                sent.true_tags[t] = noisy.data.examples[k].true_label;
            }
        }
        write_conll(a.output, sentences, tags);
    } else {
        throw ConfigError("unknown format '" + a.format + "'");
    }
    if (!a.mask.empty()) write_flip_mask(a.mask, noisy.data, noisy.mask);
    for (const auto& w : noisy.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "flipped " << noisy.mask.flip_count() << " of " << noisy.data.size() << '\n';
    return 0;
}

struct EvalArgs {
    std::string predictions, task = "synthetic", schema, out;
};

int evaluate_cmd(const EvalArgs& a) {
    const TaskKind task = parse_task(a.task);
    Dataset d;
    d.task = task;
    if (task == TaskKind::tagging) {
        if (a.schema.empty()) throw ConfigError("--schema is required for tagging");
        d.tags = read_schema(a.schema).tag_set();
    } else if (task == TaskKind::relation) {
        if (a.schema.empty()) throw ConfigError("--schema is required for relation");
        d.negative_class = read_schema(a.schema).negative_index();
    }
    std::ifstream in(a.predictions);
    if (!in) throw DataError("cannot read " + a.predictions);
    std::string line;
    if (!std::getline(in, line) || line != "id,group,gold,pred") {
        throw DataError(a.predictions + ":1: expected header id,group,gold,pred");
    }
    std::vector<int> gold, pred;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        Example e;
        int p = 0;
        if (!(row >> e.id >> e.group >> e.label >> p)) {
            throw DataError(a.predictions + ":" + std::to_string(line_no) + ": malformed row");
        }
        gold.push_back(e.label);
        pred.push_back(p);
        d.examples.push_back(std::move(e));
    }
    const F1Report r = task_f1(d, gold, pred);
    std::ostringstream csv;
    csv << kF1CsvHeader << '\n' << to_csv_row(r) << '\n';
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out);
        if (!out) throw DataError("cannot write " + a.out);
        out << csv.str();
    }
    return 0;
}

struct GenArgs {
    std::string kind = "gaussian", out;
    std::uint64_t seed = 1;
    GaussianMixtureSpec gaussian;
    TaggingToySpec tagging;
};

int gen_synthetic_cmd(GenArgs a) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    if (a.kind == "gaussian") {
        const auto s = make_gaussian_mixture(a.gaussian, a.seed);
        write_feature_csv(dir / "train.csv", s.train);
        write_feature_csv(dir / "dev.csv", s.dev);
        write_feature_csv(dir / "test.csv", s.test);
        std::cout << "wrote " << s.train.size() << '/' << s.dev.size() << '/' << s.test.size()
                  << " instances to " << dir.string() << '\n';
    } else if (a.kind == "tagging") {
        const auto c = make_tagging_toy(a.tagging, a.seed);
        Schema schema;
        schema.tag_types = c.entity_types;
        const TagSet tags = schema.tag_set();
        write_schema(dir / "schema.json", schema);
        write_conll(dir / "train.conll", c.train, tags);
        write_conll(dir / "dev.conll", c.dev, tags);
        write_conll(dir / "test.conll", c.test, tags);
        std::cout << "wrote " << c.train.size() << '/' << c.dev.size() << '/' << c.test.size()
                  << " sentences to " << dir.string() << '\n';
    } else {
        throw ConfigError("unknown synthetic kind '" + a.kind + "'");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Co-regularized training from noisy labels"};
    app.require_subcommand(1);

    RunArgs train_args, analyze_args, audit_args;
    add_run_options(app.add_subcommand("train", "train a method over all configured seeds"), train_args);
    add_run_options(app.add_subcommand("analyze-noise", "clean-set F1 curves over a gamma grid"), analyze_args);
    add_run_options(app.add_subcommand("audit-labels", "rank training instances by suspected label noise"),
                    audit_args);

    NoiseArgs noise_args;
    auto* inject = app.add_subcommand("inject-noise", "flip a fraction of labels in a data file");
    inject->add_option("-i,--input", noise_args.input)->required()->check(CLI::ExistingFile);
    inject->add_option("-o,--output", noise_args.output)->required();
    inject->add_option("--mask", noise_args.mask, "flip mask CSV");
    inject->add_option("--format", noise_args.format)->check(CLI::IsMember({"features", "jsonl", "conll"}));
    inject->add_option("--schema", noise_args.schema)->check(CLI::ExistingFile);
    inject->add_option("--num-classes", noise_args.num_classes, "classes in a feature table");
    inject->add_option("--rate", noise_args.rate, "flip fraction (defaults depend on the format)");
    inject->add_option("--scheme", noise_args.scheme)->check(CLI::IsMember({"uniform_flip", "class_conditional"}));
    inject->add_option("--confusion", noise_args.confusion, "JSON C x C confusion table")->check(CLI::ExistingFile);
    inject->add_option("--seed", noise_args.seed);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "score a predictions CSV");
    eval->add_option("-p,--predictions", eval_args.predictions)->required()->check(CLI::ExistingFile);
    eval->add_option("--task", eval_args.task)->check(CLI::IsMember({"relation", "tagging", "synthetic"}));
    eval->add_option("--schema", eval_args.schema)->check(CLI::ExistingFile);
    eval->add_option("-o,--out", eval_args.out);

    std::string run_dir, curves_out;
    auto* exp = app.add_subcommand("export-curves", "collect per-epoch logs into one long-format CSV");
    exp->add_option("-r,--run", run_dir)->required();
    exp->add_option("-o,--out", curves_out, "defaults to <run>/curves.csv");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset");
    gen->add_option("--kind", gen_args.kind)->check(CLI::IsMember({"gaussian", "tagging"}));
    gen->add_option("-o,--out", gen_args.out)->required();
    gen->add_option("--seed", gen_args.seed);
    gen->add_option("--classes", gen_args.gaussian.num_classes);
    gen->add_option("--features", gen_args.gaussian.num_features);
    gen->add_option("--separation", gen_args.gaussian.separation);
    gen->add_option("--stddev", gen_args.gaussian.stddev);
    std::optional<std::size_t> n_train, n_dev, n_test;
    gen->add_option("--train", n_train);
    gen->add_option("--dev", n_dev);
    gen->add_option("--test", n_test);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("train")) {
            const auto cfg = load_run_config(train_args);
            return report(run_experiment(cfg), cfg);
        }
        if (app.got_subcommand("analyze-noise")) {
            const auto cfg = load_run_config(analyze_args);
            return report(run_noise_analysis(cfg), cfg);
        }
        if (app.got_subcommand("audit-labels")) {
            const auto cfg = load_run_config(audit_args);
            return report(run_label_audit(cfg), cfg);
        }
        if (app.got_subcommand("inject-noise")) return inject_noise_cmd(noise_args);
        if (app.got_subcommand("evaluate")) return evaluate_cmd(eval_args);
        if (app.got_subcommand("export-curves")) {
            const fs::path out = curves_out.empty() ? fs::path(run_dir) / "curves.csv" : fs::path(curves_out);
            const std::size_t rows = export_curves(run_dir, out);
            std::cout << "wrote " << rows << " rows to " << out.string() << '\n';
            return 0;
        }
        if (app.got_subcommand("gen-synthetic")) {
            if (n_train) gen_args.gaussian.num_train = gen_args.tagging.num_train = *n_train;
            if (n_dev) gen_args.gaussian.num_dev = gen_args.tagging.num_dev = *n_dev;
            if (n_test) gen_args.gaussian.num_test = gen_args.tagging.num_test = *n_test;
            return gen_synthetic_cmd(gen_args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
