#include "coreg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "coreg/error.hpp"
#include "coreg/format.hpp"
#include "coreg/io.hpp"

namespace coreg {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Method method) {
    switch (method) {
    case Method::coreg: return "coreg";
    case Method::plain: return "plain";
    case Method::small_loss: return "small_loss";
    case Method::relabel: return "relabel";
    case Method::crossweigh: return "crossweigh";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "coreg") return Method::coreg;
    if (name == "plain") return Method::plain;
    if (name == "small_loss") return Method::small_loss;
    if (name == "relabel") return Method::relabel;
    if (name == "crossweigh") return Method::crossweigh;
    throw ConfigError("unknown method '" + name + "'");
}

ExperimentConfig default_config(TaskKind task) {
    ExperimentConfig c;
    c.task = task;
    c.train.hidden_sizes = {64, 64};
    switch (task) {
    case TaskKind::relation: c.train.base_lr = 3e-5; break;
    case TaskKind::tagging: c.train.base_lr = 1e-5; break;
    case TaskKind::synthetic: c.train.base_lr = 1e-2; break;
    }
    return c;
}

namespace {

fs::path resolve_path(const json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j[key].is_null()) return {};
    fs::path p = j[key].get<std::string>();
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

} // namespace

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
    try {
        const TaskKind task = parse_task(j.value("task", std::string("synthetic")));
        ExperimentConfig c = default_config(task);
        if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
        read_opt(j, "seeds", c.seeds);
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();

        if (j.contains("data")) {
            const auto& d = j["data"];
            c.data.train = resolve_path(d, "train", base_dir);
            c.data.dev = resolve_path(d, "dev", base_dir);
            c.data.test = resolve_path(d, "test", base_dir);
            c.data.schema = resolve_path(d, "schema", base_dir);
            c.data.pool = resolve_path(d, "pool", base_dir);
            c.data.relabels = resolve_path(d, "relabels", base_dir);
            read_opt(d, "window", c.data.window);
        }
        if (j.contains("synthetic")) {
            const auto& s = j["synthetic"];
            const std::string kind = s.value("kind", std::string("gaussian"));
            if (kind == "gaussian") c.synthetic.kind = SyntheticKind::gaussian;
            else if (kind == "tagging") c.synthetic.kind = SyntheticKind::tagging;
            else throw ConfigError("unknown synthetic kind '" + kind + "'");
            auto& g = c.synthetic.gaussian;
            read_opt(s, "num_classes", g.num_classes);
            read_opt(s, "num_features", g.num_features);
            read_opt(s, "num_train", g.num_train);
            read_opt(s, "num_dev", g.num_dev);
            read_opt(s, "num_test", g.num_test);
            read_opt(s, "separation", g.separation);
            read_opt(s, "stddev", g.stddev);
            auto& t = c.synthetic.tagging;
            read_opt(s, "num_train", t.num_train);
            read_opt(s, "num_dev", t.num_dev);
            read_opt(s, "num_test", t.num_test);
            read_opt(s, "min_length", t.min_length);
            read_opt(s, "max_length", t.max_length);
            if (s.contains("data_seed") && !s["data_seed"].is_null()) {
                c.synthetic.data_seed = s["data_seed"].get<std::uint64_t>();
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            auto& tc = c.train;
            read_opt(t, "models", tc.num_models);
            read_opt(t, "epochs", tc.epochs);
            read_opt(t, "total_steps", tc.total_steps);
            read_opt(t, "alpha", tc.warmup_pct);
            read_opt(t, "gamma", tc.gamma);
            read_opt(t, "eps", tc.kl_eps);
            read_opt(t, "batch_size", tc.batch_size);
            read_opt(t, "lr", tc.base_lr);
            if (t.contains("aggregate")) tc.aggregate = parse_aggregate(t["aggregate"].get<std::string>());
            read_opt(t, "soft_target_gradient", tc.soft_target_gradient);
            if (t.contains("selection")) tc.selection = parse_selection(t["selection"].get<std::string>());
            if (t.contains("checkpoint")) {
                const auto mode = t["checkpoint"].get<std::string>();
                if (mode != "best_dev" && mode != "last") throw ConfigError("checkpoint must be best_dev or last");
                tc.keep_best_checkpoint = mode == "best_dev";
            }
            read_opt(t, "hidden", tc.hidden_sizes);
            read_opt(t, "dropout", tc.dropout);
        }
        if (j.contains("noise") && !j["noise"].is_null()) {
            const auto& n = j["noise"];
            NoiseSpec spec;
            read_opt(n, "rate", spec.rate);
            if (n.contains("scheme")) spec.scheme = parse_noise_scheme(n["scheme"].get<std::string>());
            read_opt(n, "confusion", spec.confusion);
            c.noise = spec;
        }
        if (j.contains("baseline")) {
            const auto& b = j["baseline"];
            read_opt(b, "delta", c.delta_max);
            read_opt(b, "folds", c.crossweigh.folds);
            read_opt(b, "iterations", c.crossweigh.iterations);
            read_opt(b, "base_weight", c.crossweigh.base_weight);
        }
        if (j.contains("analysis")) {
            const auto& a = j["analysis"];
            read_opt(a, "gammas", c.analysis.gammas);
            read_opt(a, "pool_size", c.analysis.pool_size);
            read_opt(a, "pool_noise_rate", c.analysis.pool_noise_rate);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["task"] = to_string(c.task);
    j["method"] = to_string(c.method);
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir.string();
    j["data"] = {{"train", c.data.train.string()},       {"dev", c.data.dev.string()},
                 {"test", c.data.test.string()},         {"schema", c.data.schema.string()},
                 {"pool", c.data.pool.string()},         {"relabels", c.data.relabels.string()},
                 {"window", c.data.window}};
    const auto& g = c.synthetic.gaussian;
    const auto& tg = c.synthetic.tagging;
    json s;
    s["kind"] = c.synthetic.kind == SyntheticKind::gaussian ? "gaussian" : "tagging";
    if (c.synthetic.kind == SyntheticKind::gaussian) {
        s["num_classes"] = g.num_classes;
        s["num_features"] = g.num_features;
        s["num_train"] = g.num_train;
        s["num_dev"] = g.num_dev;
        s["num_test"] = g.num_test;
        s["separation"] = g.separation;
        s["stddev"] = g.stddev;
    } else {
        s["num_train"] = tg.num_train;
        s["num_dev"] = tg.num_dev;
        s["num_test"] = tg.num_test;
        s["min_length"] = tg.min_length;
        s["max_length"] = tg.max_length;
    }
    s["data_seed"] = c.synthetic.data_seed ? json(*c.synthetic.data_seed) : json(nullptr);
    j["synthetic"] = s;
    const auto& t = c.train;
    j["train"] = {{"models", t.num_models},
                  {"epochs", t.epochs},
                  {"total_steps", t.total_steps},
                  {"alpha", t.warmup_pct},
                  {"gamma", t.gamma},
                  {"eps", t.kl_eps},
                  {"batch_size", t.batch_size},
                  {"lr", t.base_lr},
                  {"aggregate", to_string(t.aggregate)},
                  {"soft_target_gradient", t.soft_target_gradient},
                  {"selection", to_string(t.selection)},
                  {"checkpoint", t.keep_best_checkpoint ? "best_dev" : "last"},
                  {"hidden", t.hidden_sizes},
                  {"dropout", t.dropout}};
    if (c.noise) {
        j["noise"] = {{"rate", c.noise->rate}, {"scheme", to_string(c.noise->scheme)}};
        if (!c.noise->confusion.empty()) j["noise"]["confusion"] = c.noise->confusion;
    } else {
        j["noise"] = nullptr;
    }
    j["baseline"] = {{"delta", c.delta_max},
                     {"folds", c.crossweigh.folds},
                     {"iterations", c.crossweigh.iterations},
                     {"base_weight", c.crossweigh.base_weight}};
    j["analysis"] = {{"gammas", c.analysis.gammas},
                     {"pool_size", c.analysis.pool_size},
                     {"pool_noise_rate", c.analysis.pool_noise_rate}};
    return j;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void validate(const ExperimentConfig& c) {
    if (c.seeds.empty()) throw ConfigError("seeds list is empty");
    validate(c.train, c.method == Method::plain || c.method == Method::crossweigh ? 1 : 2);
    for (const auto* p : {&c.data.train, &c.data.dev, &c.data.test, &c.data.schema, &c.data.pool,
                          &c.data.relabels}) {
        if (!p->empty() && !fs::exists(*p)) throw ConfigError("missing file " + p->string());
    }
    if (c.task != TaskKind::synthetic) {
        if (c.data.train.empty()) throw ConfigError("data.train is required for task " + to_string(c.task));
        if (c.data.schema.empty()) throw ConfigError("data.schema is required for task " + to_string(c.task));
    }
    if (c.noise && !(c.noise->rate >= 0.0 && c.noise->rate < 1.0)) throw ConfigError("noise rate must be in [0,1)");
    if (!(c.delta_max >= 0.0 && c.delta_max <= 100.0)) throw ConfigError("delta must be in [0,100]");
    if (!(c.analysis.pool_noise_rate >= 0.0 && c.analysis.pool_noise_rate < 1.0)) {
        throw ConfigError("analysis.pool_noise_rate must be in [0,1)");
    }
}

fs::path resolve_output_dir(const fs::path& dir) {
    if (dir.is_absolute()) return dir;
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
        return fs::path(root) / dir;
    }
    return dir;
}

std::string hash_text(const std::string& text) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a64(text);
    return os.str();
}

namespace {

Vocab toy_vocab() {
    Vocab v;
    for (const auto& tok : tagging_toy_tokens()) v.add(tok);
    return v;
}

std::size_t token_count(const std::vector<TaggingInstance>& corpus) {
    std::size_t n = 0;
    for (const auto& s : corpus) n += s.tokens.size();
    return n;
}

struct RawSplits {
    Dataset train, dev, test;
};

RawSplits load_splits(const ExperimentConfig& c, std::uint64_t seed, std::size_t extra_train = 0) {
    RawSplits out;
    const std::uint64_t data_seed = c.synthetic.data_seed.value_or(seed);
    if (c.task == TaskKind::synthetic && !c.data.train.empty()) {
        // Pre-generated feature tables, e.g. from gen-synthetic.
        const std::size_t classes = c.synthetic.gaussian.num_classes;
        out.train = read_feature_csv(c.data.train, classes);
        if (!c.data.dev.empty()) out.dev = read_feature_csv(c.data.dev, classes);
        if (!c.data.test.empty()) out.test = read_feature_csv(c.data.test, classes);
        if (extra_train > 0) throw ConfigError("analyze-noise pools need generated synthetic data");
    } else if (c.task == TaskKind::synthetic && c.synthetic.kind == SyntheticKind::gaussian) {
        auto spec = c.synthetic.gaussian;
        spec.num_train += extra_train;
        auto s = make_gaussian_mixture(spec, data_seed);
        out = {std::move(s.train), std::move(s.dev), std::move(s.test)};
    } else if (c.task == TaskKind::synthetic) {
        auto spec = c.synthetic.tagging;
        spec.num_train += extra_train;
        auto corpus = make_tagging_toy(spec, data_seed);
        const TagSet tags(corpus.entity_types);
        const Vocab vocab = toy_vocab();
        const std::size_t n_train = token_count(corpus.train);
        out.train = make_tagging_dataset(corpus.train, vocab, tags, c.data.window, 0);
        out.dev = make_tagging_dataset(corpus.dev, vocab, tags, c.data.window, n_train);
        out.test = make_tagging_dataset(corpus.test, vocab, tags, c.data.window,
                                        n_train + token_count(corpus.dev));
        for (auto* d : {&out.train, &out.dev, &out.test}) d->task = TaskKind::tagging;
    } else if (c.task == TaskKind::relation) {
        const Schema schema = read_schema(c.data.schema);
        const auto train = read_relation_jsonl(c.data.train, schema);
        const auto dev = c.data.dev.empty() ? std::vector<SentenceInstance>{} : read_relation_jsonl(c.data.dev, schema);
        const auto test = c.data.test.empty() ? std::vector<SentenceInstance>{} : read_relation_jsonl(c.data.test, schema);
        const Vocab vocab = build_relation_vocab(train, schema.entity_types);
        out.train = make_relation_dataset(train, vocab, schema, 0);
        out.dev = make_relation_dataset(dev, vocab, schema, train.size());
        out.test = make_relation_dataset(test, vocab, schema, train.size() + dev.size());
    } else {
        const Schema schema = read_schema(c.data.schema);
        const TagSet tags = schema.tag_set();
        const auto train = read_conll(c.data.train, tags);
        const auto dev = c.data.dev.empty() ? std::vector<TaggingInstance>{} : read_conll(c.data.dev, tags);
        const auto test = c.data.test.empty() ? std::vector<TaggingInstance>{} : read_conll(c.data.test, tags);
        const Vocab vocab = build_tagging_vocab(train);
        const std::size_t n_train = token_count(train);
        out.train = make_tagging_dataset(train, vocab, tags, c.data.window, 0);
        out.dev = make_tagging_dataset(dev, vocab, tags, c.data.window, n_train);
        out.test = make_tagging_dataset(test, vocab, tags, c.data.window, n_train + token_count(dev));
    }
    return out;
}

std::optional<NoiseSpec> seeded_noise(const ExperimentConfig& c, std::uint64_t seed, const char* split) {
    if (!c.noise) return std::nullopt;
    NoiseSpec spec = *c.noise;
    spec.seed = derive_seed(seed, std::string("noise.") + split);
    return spec;
}

} // namespace

TaskData build_task_data(const ExperimentConfig& c, std::uint64_t seed) {
    auto raw = load_splits(c, seed);
    TaskData out{std::move(raw.train), std::move(raw.dev), std::move(raw.test), std::nullopt};
    if (auto spec = seeded_noise(c, seed, "train")) {
        auto noisy = inject_noise(out.train, *spec);
        out.train = std::move(noisy.data);
        out.train_flips = std::move(noisy.mask);
    }
    if (auto spec = seeded_noise(c, seed, "dev"); spec && !out.dev.empty()) {
        out.dev = inject_noise(out.dev, *spec).data;
    }
    if (out.test.has_true_labels()) out.test = out.test.with_true_labels();
    return out;
}

F1Report median_report(std::vector<F1Report> reports) {
    if (reports.empty()) throw Error("median of an empty set");
    auto median_of = [&](auto get) {
        std::vector<double> v;
        for (const auto& r : reports) v.push_back(static_cast<double>(get(r)));
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    };
    F1Report m;
    m.tp = static_cast<std::size_t>(median_of([](const F1Report& r) { return r.tp; }));
    m.fp = static_cast<std::size_t>(median_of([](const F1Report& r) { return r.fp; }));
    m.fn = static_cast<std::size_t>(median_of([](const F1Report& r) { return r.fn; }));
    m.precision = median_of([](const F1Report& r) { return r.precision; });
    m.recall = median_of([](const F1Report& r) { return r.recall; });
    m.f1 = median_of([](const F1Report& r) { return r.f1; });
    return m;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const DivergenceError*>(&e)) return 3;
    return 2;
}

/// Shared scaffolding for the per-seed runners: output directory, config
/// snapshot, manifest and error capture.
class RunContext {
public:
    explicit RunContext(const ExperimentConfig& config)
        : config_(config), dir_(resolve_output_dir(config.output_dir)),
          start_(std::chrono::steady_clock::now()) {
        validate(config_);
        fs::create_directories(dir_ / "logs");
        const std::string snapshot = config_to_json(config_).dump(2) + "\n";
        open_out(dir_ / "config.json") << snapshot;
        manifest_.config_hash = hash_text(snapshot);
        add_artifact("config.json");
    }

    const fs::path& dir() const { return dir_; }
    RunManifest& manifest() { return manifest_; }
    void add_artifact(const std::string& name) { manifest_.artifacts.push_back(name); }

    template <typename Fn>
    void run_seed(std::uint64_t seed, Fn&& fn) {
        SeedRow row;
        row.seed = seed;
        try {
            fn(row);
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
            if (!manifest_.failed) {
                manifest_.failed = true;
                manifest_.exit_code = exit_code_for(e);
                manifest_.error = e.what();
            }
        }
        manifest_.rows.push_back(std::move(row));
    }

    RunManifest finish() {
        manifest_.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        add_artifact("manifest.json");
        json j;
        j["config_hash"] = manifest_.config_hash;
        j["task"] = to_string(config_.task);
        j["method"] = to_string(config_.method);
        j["status"] = manifest_.failed ? "failed" : "ok";
        if (manifest_.failed) j["error"] = manifest_.error;
        j["wall_clock_seconds"] = manifest_.wall_clock_seconds;
        j["artifacts"] = manifest_.artifacts;
        auto report_json = [](const std::optional<F1Report>& r) -> json {
            if (!r) return nullptr;
            return {{"tp", r->tp}, {"fp", r->fp}, {"fn", r->fn},
                    {"precision", r->precision}, {"recall", r->recall}, {"f1", r->f1}};
        };
        json rows = json::array();
        for (const auto& r : manifest_.rows) {
            rows.push_back({{"seed", r.seed},
                            {"status", r.status},
                            {"dev", report_json(r.dev)},
                            {"test", report_json(r.test)},
                            {"selected_model", r.selected_model},
                            {"checkpoint_epoch", r.checkpoint_epoch}});
        }
        j["seeds"] = rows;
        j["median"] = {{"dev", report_json(manifest_.median_dev)}, {"test", report_json(manifest_.median_test)}};
        open_out(dir_ / "manifest.json") << j.dump(2) << '\n';
        return manifest_;
    }

private:
    const ExperimentConfig& config_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    RunManifest manifest_;
};

void write_epoch_log(const fs::path& path, const std::string& method, double gamma,
                     std::uint64_t seed, const TrainResult& result) {
    auto out = open_out(path);
    out << kCurveHeader << '\n';
    const std::string prefix = method + "," + fmt_double(gamma) + "," + std::to_string(seed) + ",";
    for (const auto& e : result.epochs) {
        const std::string row = prefix + std::to_string(e.epoch) + ",";
        out << row << "train,task_loss," << fmt_double(e.task_loss) << '\n';
        out << row << "train,agreement_loss," << fmt_double(e.agreement_loss) << '\n';
        out << row << "train,joint_loss," << fmt_double(e.joint_loss) << '\n';
        for (std::size_t k = 0; k < e.dev_f1.size(); ++k) {
            out << row << "dev,f1_model" << k << ',' << fmt_double(e.dev_f1[k]) << '\n';
        }
    }
}

void write_step_log(const fs::path& path, const TrainResult& result) {
    auto out = open_out(path);
    out << kStepHeader << '\n';
    for (const auto& s : result.steps) {
        out << s.step << ',' << (s.warmup ? 1 : 0) << ',' << s.kept << ',' << fmt_double(s.task_loss) << ','
            << fmt_double(s.agreement_loss) << ',' << fmt_double(s.joint_loss) << ',';
        for (std::size_t k = 0; k < s.per_model_sup.size(); ++k) {
            out << (k ? ";" : "") << fmt_double(s.per_model_sup[k]);
        }
        out << '\n';
    }
}

void write_predictions(const fs::path& path, const Dataset& data, std::span<const int> pred) {
    auto out = open_out(path);
    out << "id,group,gold,pred\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& e = data.examples[i];
        out << e.id << ',' << e.group << ',' << e.label << ',' << pred[i] << '\n';
    }
}

std::string seed_file(const std::string& stem, std::uint64_t seed, const std::string& ext) {
    return stem + "_seed" + std::to_string(seed) + ext;
}

double effective_gamma(const ExperimentConfig& c) {
    return c.method == Method::coreg ? c.train.gamma : 0.0;
}

TrainResult train_method(const ExperimentConfig& c, const TrainConfig& cfg, const TaskData& data,
                         const fs::path& dir, std::uint64_t seed, RunContext& ctx) {
    const Dataset* dev = data.dev.empty() ? nullptr : &data.dev;
    switch (c.method) {
    case Method::coreg: return train(data.train, dev, cfg);
    case Method::plain: return train_plain(data.train, dev, cfg);
    case Method::small_loss:
    case Method::relabel: {
        TrainConfig ens_cfg = cfg;
        ens_cfg.gamma = 0.0;
        const std::size_t total = cfg.total_steps > 0
                                      ? cfg.total_steps
                                      : cfg.epochs * steps_per_epoch(data.train.size(), cfg.batch_size);
        TrainOptions opts;
        opts.hook = c.method == Method::small_loss ? small_loss_hook(c.delta_max, total)
                                                   : relabel_hook(c.delta_max, total);
        return train_ensemble(data.train, dev, ens_cfg, opts);
    }
    case Method::crossweigh: {
        const auto cw = crossweigh_weights(data.train, c.crossweigh, cfg);
        const std::string name = seed_file("weights", seed, ".tsv");
        write_weights(dir / name, data.train, cw.weights);
        ctx.add_artifact(name);
        return train_plain(data.train, dev, cfg, &cw.weights);
    }
    }
    throw ConfigError("unknown method");
}

void write_metrics_csv(const fs::path& path, const RunManifest& m) {
    auto out = open_out(path);
    out << kMetricsHeader << '\n';
    for (const auto& r : m.rows) {
        if (r.dev) out << r.seed << ",dev," << to_csv_row(*r.dev) << '\n';
        if (r.test) out << r.seed << ",test," << to_csv_row(*r.test) << '\n';
    }
    if (m.median_dev) out << "median,dev," << to_csv_row(*m.median_dev) << '\n';
    if (m.median_test) out << "median,test," << to_csv_row(*m.median_test) << '\n';
}

void fill_medians(RunManifest& m) {
    std::vector<F1Report> dev, test;
    for (const auto& r : m.rows) {
        if (r.dev) dev.push_back(*r.dev);
        if (r.test) test.push_back(*r.test);
    }
    if (!dev.empty()) m.median_dev = median_report(dev);
    if (!test.empty()) m.median_test = median_report(test);
}

} // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
    RunContext ctx(config);
    const fs::path& dir = ctx.dir();
    for (std::uint64_t seed : config.seeds) {
        ctx.run_seed(seed, [&](SeedRow& row) {
            TrainConfig cfg = config.train;
            cfg.master_seed = seed;
            const TaskData data = build_task_data(config, seed);
            const TrainResult result = train_method(config, cfg, data, dir, seed, ctx);
            const MlpModel& model = result.ensemble.models.at(result.selected_model);
            row.selected_model = result.selected_model;
            row.checkpoint_epoch = result.checkpoint_epoch;
            if (!data.dev.empty()) row.dev = evaluate(model, data.dev);
            if (!data.test.empty()) {
                const auto pred = predict_labels(model, data.test);
                row.test = task_f1(data.test, data.test.labels(), pred);
                const std::string name = seed_file("predictions", seed, ".csv");
                write_predictions(dir / name, data.test, pred);
                ctx.add_artifact(name);
            }
            const std::string log_name = "logs/" + seed_file("epochs", seed, ".csv");
            write_epoch_log(dir / log_name, to_string(config.method), effective_gamma(config), seed, result);
            ctx.add_artifact(log_name);
            fs::create_directories(dir / "steps");
            const std::string step_name = "steps/" + seed_file("steps", seed, ".csv");
            write_step_log(dir / step_name, result);
            ctx.add_artifact(step_name);
        });
    }
    RunManifest& m = ctx.manifest();
    fill_medians(m);
    write_metrics_csv(dir / "metrics.csv", m);
    ctx.add_artifact("metrics.csv");
    if (!m.failed) {
        export_curves(dir, dir / "curves.csv");
        ctx.add_artifact("curves.csv");
    }
    return ctx.finish();
}

namespace {

struct AnalysisSets {
    Dataset train, noisy, clean;
};

AnalysisSets analysis_sets(const ExperimentConfig& c, std::uint64_t seed) {
    AnalysisSets out;
    if (c.task == TaskKind::synthetic) {
        const std::size_t base = c.synthetic.kind == SyntheticKind::gaussian ? c.synthetic.gaussian.num_train
                                                                             : c.synthetic.tagging.num_train;
        auto raw = load_splits(c, seed, c.analysis.pool_size);
        std::vector<std::size_t> train_idx, pool_idx;
        for (std::size_t i = 0; i < raw.train.size(); ++i) {
            (raw.train.examples[i].group < base ? train_idx : pool_idx).push_back(i);
        }
        out.train = raw.train.subset(train_idx);
        if (auto spec = seeded_noise(c, seed, "train")) out.train = inject_noise(out.train, *spec).data;
        NoiseSpec pool_spec;
        pool_spec.rate = c.analysis.pool_noise_rate;
        pool_spec.seed = derive_seed(seed, "noise.pool");
        const auto pool = inject_noise(raw.train.subset(pool_idx), pool_spec).data;
        std::tie(out.noisy, out.clean) = build_noisy_clean_sets(pool, pool.labels(), pool.true_labels());
        return out;
    }
    if (c.data.pool.empty()) throw ConfigError("analyze-noise on real data needs data.pool");
    ExperimentConfig pool_cfg = c;
    pool_cfg.data.dev.clear();
    pool_cfg.data.test = c.data.pool;
    auto raw = load_splits(pool_cfg, seed);
    out.train = raw.train;
    if (auto spec = seeded_noise(c, seed, "train")) out.train = inject_noise(out.train, *spec).data;
    const Dataset& pool = raw.test;
    std::vector<int> relabels;
    if (!c.data.relabels.empty()) {
        std::map<std::size_t, int> by_id;
        std::ifstream in(c.data.relabels);
        std::string line;
        std::getline(in, line);  // header
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream row(line);
            std::size_t id;
            int label;
            if (!(row >> id >> label)) {
                throw DataError(c.data.relabels.string() + ":" + std::to_string(line_no) + ": malformed row");
            }
            by_id[id] = label;
        }
        // Relabel ids are positions within the pool file.
        for (std::size_t i = 0; i < pool.size(); ++i) {
            auto it = by_id.find(i);
            relabels.push_back(it == by_id.end() ? pool.examples[i].label : it->second);
        }
    } else {
        relabels = pool.true_labels();
    }
    std::tie(out.noisy, out.clean) = build_noisy_clean_sets(pool, pool.labels(), relabels);
    return out;
}

} // namespace

RunManifest run_noise_analysis(const ExperimentConfig& config) {
    RunContext ctx(config);
    const fs::path& dir = ctx.dir();
    auto summary = open_out(dir / "analysis_summary.csv");
    summary << "seed,gamma,noisy_set_size,peak_f1,peak_epoch,final_f1\n";
    for (std::uint64_t seed : config.seeds) {
        ctx.run_seed(seed, [&](SeedRow&) {
            TrainConfig cfg = config.train;
            cfg.master_seed = seed;
            const auto sets = analysis_sets(config, seed);
            const auto curve = noise_overfit_eval(sets.train, sets.noisy, sets.clean, config.analysis.gammas, cfg);
            const std::string log_name = "logs/" + seed_file("analysis", seed, ".csv");
            auto log = open_out(dir / log_name);
            log << kCurveHeader << '\n';
            for (const auto& p : curve) {
                log << "coreg," << fmt_double(p.gamma) << ',' << seed << ',' << p.epoch << ",clean,f1,"
                    << fmt_double(p.clean_f1) << '\n';
            }
            ctx.add_artifact(log_name);
            for (double gamma : config.analysis.gammas) {
                double peak = -1.0, last = 0.0;
                std::size_t peak_epoch = 0;
                for (const auto& p : curve) {
                    if (p.gamma != gamma) continue;
                    if (p.clean_f1 > peak) {
                        peak = p.clean_f1;
                        peak_epoch = p.epoch;
                    }
                    last = p.clean_f1;
                }
                summary << seed << ',' << fmt_double(gamma) << ',' << sets.noisy.size() << ','
                        << fmt_double(peak) << ',' << peak_epoch << ',' << fmt_double(last) << '\n';
            }
        });
    }
    summary.close();
    ctx.add_artifact("analysis_summary.csv");
    if (!ctx.manifest().failed) {
        export_curves(dir, dir / "analysis_curves.csv");
        ctx.add_artifact("analysis_curves.csv");
    }
    return ctx.finish();
}

RunManifest run_label_audit(const ExperimentConfig& config) {
    RunContext ctx(config);
    const fs::path& dir = ctx.dir();
    auto summary = open_out(dir / "audit_summary.csv");
    summary << "seed,instances,known_noisy,flagged,flag_precision,flag_recall,auroc\n";
    for (std::uint64_t seed : config.seeds) {
        ctx.run_seed(seed, [&](SeedRow&) {
            TrainConfig cfg = config.train;
            cfg.master_seed = seed;
            const TaskData data = build_task_data(config, seed);
            const Dataset* dev = data.dev.empty() ? nullptr : &data.dev;
            const auto result = train(data.train, dev, cfg);
            const auto rows = disagreement_report(result.ensemble, data.train, cfg);
            const std::string name = seed_file("suspects", seed, ".csv");
            write_suspect_report(dir / name, rows);
            ctx.add_artifact(name);

            std::vector<bool> noisy_by_pos(data.train.size(), false);
            if (data.train_flips) {
                noisy_by_pos = data.train_flips->flipped;
            } else if (data.train.has_true_labels()) {
                for (std::size_t i = 0; i < data.train.size(); ++i) {
                    noisy_by_pos[i] = data.train.examples[i].label != data.train.examples[i].true_label;
                }
            }
            std::map<std::size_t, bool> noisy_by_id;
            for (std::size_t i = 0; i < data.train.size(); ++i) noisy_by_id[data.train.examples[i].id] = noisy_by_pos[i];
            std::vector<double> scores;
            std::vector<bool> positive;
            std::size_t flagged = 0, flagged_noisy = 0, known = 0;
            for (const auto& r : rows) {
                scores.push_back(r.sup_loss);
                positive.push_back(noisy_by_id[r.id]);
                known += positive.back();
                flagged += r.flagged;
                flagged_noisy += r.flagged && positive.back();
            }
            const double prec = flagged ? static_cast<double>(flagged_noisy) / static_cast<double>(flagged) : 0.0;
            const double rec = known ? static_cast<double>(flagged_noisy) / static_cast<double>(known) : 0.0;
            summary << seed << ',' << rows.size() << ',' << known << ',' << flagged << ',' << fmt_double(prec)
                    << ',' << fmt_double(rec) << ',' << fmt_double(auroc(scores, positive)) << '\n';
        });
    }
    summary.close();
    ctx.add_artifact("audit_summary.csv");
    return ctx.finish();
}

std::size_t export_curves(const fs::path& run_dir, const fs::path& out_path) {
    const fs::path logs = run_dir / "logs";
    if (!fs::is_directory(logs)) throw DataError("no logs directory in " + run_dir.string());
    // Order by file stem, then numerically by seed.
    std::vector<std::tuple<std::string, std::uint64_t, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(logs)) {
        if (entry.path().extension() != ".csv") continue;
        const std::string stem = entry.path().stem().string();
        const auto at = stem.rfind("_seed");
        std::uint64_t seed = 0;
        std::string kind = stem;
        if (at != std::string::npos) {
            kind = stem.substr(0, at);
            try {
                seed = std::stoull(stem.substr(at + 5));
            } catch (const std::exception&) {
                throw DataError("unexpected log file name " + entry.path().string());
            }
        }
        files.emplace_back(kind, seed, entry.path());
    }
    if (files.empty()) throw DataError("no training logs in " + logs.string());
    std::sort(files.begin(), files.end());

    std::ostringstream body;
    std::size_t rows = 0;
    for (const auto& [kind, seed, path] : files) {
        std::ifstream in(path);
        std::string line;
        if (!std::getline(in, line) || line != kCurveHeader) {
            throw DataError(path.string() + ": unexpected log header");
        }
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            body << line << '\n';
            ++rows;
        }
    }
    auto out = open_out(out_path);
    out << kCurveHeader << '\n' << body.str();
    return rows;
}

} // namespace coreg
