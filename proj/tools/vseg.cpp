// vseg: command-line front end for corpus generation, training, inference and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vseg/dataset.hpp"
#include "vseg/eval.hpp"
#include "vseg/fold.hpp"
#include "vseg/pipeline.hpp"
#include "vseg/synth.hpp"
#include "vseg/train.hpp"
#include "vseg/unet.hpp"

using namespace vseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t env_seed() {
    const char* s = std::getenv("VSEG_SEED");
    if (s == nullptr || *s == '\0') return 0;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw UsageError(std::string("VSEG_SEED is not an unsigned integer: ") + s);
    }
}

FoldGeometry parse_geom(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageError("geometry must look like SxW, got '" + text + "'");
    try {
        return FoldGeometry(std::stoull(text.substr(0, x)), std::stoull(text.substr(x + 1)));
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const DomainError*>(&e)) throw;
        throw UsageError("geometry must look like SxW, got '" + text + "'");
    }
}

FoldGeometry geometry_of(const std::vector<LabeledWindow>& windows) {
    if (windows.empty()) throw DomainError("no windows selected");
    return FoldGeometry(windows.front().window.stations(), windows.front().window.length());
}

std::vector<LabeledWindow> load(const std::string& manifest, const std::string& split) {
    auto windows = load_split(manifest, split);
    if (windows.empty())
        throw DomainError("manifest " + manifest + " has no windows" + (split.empty() ? "" : " in split '" + split + "'"));
    return windows;
}

// Options shared between subcommands. Every field is bound to a flag.
struct Common {
    std::string config;
    std::string run_log;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Chain {
    double low = 1.0, high = 15.0;
    int order = 4;
    bool no_bandpass = false, no_normalize = false;
    std::int64_t merge_gap = 100, min_len = 0;

    ChainConfig get() const {
        ChainConfig c;
        c.band.low_hz = low;
        c.band.high_hz = high;
        c.band.order = order;
        c.bandpass = !no_bandpass;
        c.normalize = !no_normalize;
        c.post.merge_gap = merge_gap;
        c.post.min_len = min_len;
        return c;
    }
};

struct Model {
    int depth = 3, base = 8, cpb = 2;
    ToyUNetSpec spec() const { return {depth, base, 1, static_cast<int>(kNumClasses), cpb}; }
};

struct Train {
    int epochs = 300;
    double lr_max = 1e-5, lr_min = 1e-6;
    int period = 25, batch_size = 8;
    double smoothing = 1.0;

    TrainConfig get(std::uint64_t seed, int threads) const {
        TrainConfig c;
        c.epochs = epochs;
        c.lr_max = lr_max;
        c.lr_min = lr_min;
        c.anneal_period_epochs = period;
        c.batch_size = batch_size;
        c.dice_smoothing = smoothing;
        c.seed = seed;
        c.threads = threads;
        return c;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON file whose keys mirror the long flag names")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "RNG seed (default: $VSEG_SEED or 0)");
    app->add_option("--run-log", c.run_log, "Append the resolved configuration here (default: stderr)");
    app->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1, 1024));
}

void add_chain(CLI::App* app, Chain& c) {
    app->add_option("--band-low", c.low, "Bandpass low corner (Hz)");
    app->add_option("--band-high", c.high, "Bandpass high corner (Hz)");
    app->add_option("--band-order", c.order, "Butterworth order");
    app->add_flag("--no-bandpass", c.no_bandpass, "Skip the bandpass filter");
    app->add_flag("--no-normalize", c.no_normalize, "Skip max-abs normalisation");
    app->add_option("--merge-gap", c.merge_gap, "Merge same-class events closer than this (samples)");
    app->add_option("--min-len", c.min_len, "Drop events shorter than this (samples)");
}

void add_model(CLI::App* app, Model& m) {
    app->add_option("--depth", m.depth, "UNet levels");
    app->add_option("--base", m.base, "Channels at the first level");
    app->add_option("--convs-per-block", m.cpb, "3x3 convolutions per block");
}

void add_train(CLI::App* app, Train& t) {
    app->add_option("--epochs", t.epochs);
    app->add_option("--lr-max", t.lr_max);
    app->add_option("--lr-min", t.lr_min);
    app->add_option("--anneal-period", t.period, "Cosine restart period (epochs)");
    app->add_option("--batch-size", t.batch_size);
    app->add_option("--smoothing", t.smoothing, "Dice smoothing term");
}

// Fills flags that were not given on the command line from the JSON config.
void apply_config(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError("config " + path + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") throw UsageError("config key '" + key + "' is not a flag of " + sub->get_name());
        if (opt->count() > 0) continue;  // flags win
        auto text = [&](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array())
            for (const auto& v : value) opt->add_result(text(v));
        else
            opt->add_result(text(value));
        opt->run_callback();
    }
}

json resolved(const CLI::App* sub) {
    json opts = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        const auto& res = opt->results();
        if (opt->get_items_expected_max() == 0)
            opts[name] = opt->count() > 0 || (!res.empty() && res.front() == "true");
        else if (opt->count() == 0)
            opts[name] = opt->get_default_str();
        else if (res.size() == 1)
            opts[name] = res.front();
        else
            opts[name] = res;
    }
    return opts;
}

std::ofstream open_out(const std::string& path) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void print_summary(const EvalReport& r) {
    json j;
    j["macro_f1"] = r.macro_f1;
    j["mean_iou"] = r.mean_iou;
    j["n_windows"] = r.n_windows;
    j["n_events"] = r.n_events;
    std::cout << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volcano-seismic event segmentation"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    Common common;
    try {
        common.seed = env_seed();
    } catch (const UsageError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }
    Chain chain;
    Model model;
    Train trainer;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    std::string synth_out, geom_text = "8x512", volcano = "SYN", split = "train";
    std::size_t per_class = 50, test_per_class = 0;
    std::size_t background = 0;
    double noise_floor = 0.02, band_shift = 1.0, sample_rate = 100.0;
    add_common(synth, common);
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--per-class", per_class, "Windows per event class");
    synth->add_option("--background", background, "Noise-only windows per split");
    synth->add_option("--test-per-class", test_per_class, "Also write a 'test' split of this size per class");
    synth->add_option("--geom", geom_text, "Stations x window length");
    synth->add_option("--noise-floor", noise_floor);
    synth->add_option("--band-shift", band_shift, "Multiply every class band by this factor");
    synth->add_option("--sample-rate", sample_rate);
    synth->add_option("--volcano", volcano, "Volcano tag written to the manifest");
    synth->add_option("--split", split, "Split tag of the main corpus");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Hold out val/test windows and balance the training pool");
    std::string manifest, prep_out, in_split;
    std::size_t val_per_class = 200, test_count = 200, train_per_class = 1500;
    add_common(prepare, common);
    prepare->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    prepare->add_option("--split", in_split, "Only use this split of the input");
    prepare->add_option("--out", prep_out, "Output directory")->required();
    prepare->add_option("--per-class", train_per_class, "Training windows per class after balancing");
    prepare->add_option("--val", val_per_class, "Validation windows per class");
    prepare->add_option("--test", test_count, "Test windows per class");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the segmenter");
    std::string model_out, loss_csv, init_model;
    std::string train_split = "train";
    add_common(train_cmd, common);
    add_chain(train_cmd, chain);
    add_model(train_cmd, model);
    add_train(train_cmd, trainer);
    train_cmd->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--split", train_split);
    train_cmd->add_option("--model-out", model_out)->required();
    train_cmd->add_option("--loss-csv", loss_csv, "Per-epoch loss trace");
    train_cmd->add_option("--init", init_model, "Start from these weights")->check(CLI::ExistingFile);

    // infer
    auto* infer = app.add_subcommand("infer", "Detect events in windows or a raw stream");
    std::string model_path, infer_out, format = "jsonl", eval_split = "test";
    std::vector<std::string> inputs;
    bool from_stdin = false;
    std::size_t hop = 0, chunk = 4096;
    add_common(infer, common);
    add_chain(infer, chain);
    infer->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    infer->add_option("--input", inputs, "VSGD window files")->check(CLI::ExistingFile);
    infer->add_option("--manifest", manifest, "Run on every window of the manifest")->check(CLI::ExistingFile);
    infer->add_option("--split", eval_split, "Manifest split ('' for all)");
    infer->add_flag("--stream", from_stdin, "Read a raw stream (JSON header line + f32 frames) from stdin");
    infer->add_option("--hop", hop, "Stream hop in samples (0: W/2)");
    infer->add_option("--chunk", chunk, "Stream frames per read");
    infer->add_option("--geom", geom_text, "Geometry for --stream");
    infer->add_option("--out", infer_out, "Output file (default: stdout)");
    infer->add_option("--format", format)->check(CLI::IsMember({"jsonl", "csv"}));

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "F1 and IoU on a manifest split");
    std::string masks_dir, json_out, csv_out;
    bool use_oracle = false;
    add_common(eval_cmd, common);
    add_chain(eval_cmd, chain);
    eval_cmd->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", eval_split);
    auto* model_opt = eval_cmd->add_option("--model", model_path)->check(CLI::ExistingFile);
    auto* oracle_opt = eval_cmd->add_flag("--oracle", use_oracle, "Score the ground-truth targets");
    auto* masks_opt = eval_cmd->add_option("--masks", masks_dir, "Directory of <window_id>.vsgm files")
                          ->check(CLI::ExistingDirectory);
    model_opt->excludes(oracle_opt)->excludes(masks_opt);
    oracle_opt->excludes(masks_opt);
    eval_cmd->add_option("--json", json_out, "Report JSON");
    eval_cmd->add_option("--csv", csv_out, "Report CSV");

    // noise-sweep
    auto* sweep = app.add_subcommand("noise-sweep", "Evaluate at SNR -5..10 dB");
    add_common(sweep, common);
    add_chain(sweep, chain);
    sweep->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    sweep->add_option("--split", eval_split);
    sweep->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    sweep->add_option("--csv", csv_out, "axis,macro_f1,mean_iou rows")->required();
    sweep->add_option("--json", json_out, "Full reports");

    // flex
    auto* flex = app.add_subcommand("flex", "Zero-shot and fine-tuning on a new volcano");
    std::string flex_out, volcano_filter;
    std::vector<double> fractions = kFlexFractions;
    int trace_every = 1;
    add_common(flex, common);
    add_chain(flex, chain);
    add_train(flex, trainer);
    flex->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    flex->add_option("--split", in_split, "Only use this split of the manifest");
    flex->add_option("--volcano", volcano_filter, "Only use windows tagged with this volcano");
    flex->add_option("--model", model_path, "Base model")->required()->check(CLI::ExistingFile);
    flex->add_option("--out", flex_out, "Output directory")->required();
    flex->add_option("--fractions", fractions);
    flex->add_option("--trace-every", trace_every, "Evaluate the test side every k epochs (0: never)");

    // fold / unfold
    auto* fold_cmd = app.add_subcommand("fold", "VSGD window -> single-plane VSGM image");
    std::string input, output;
    add_common(fold_cmd, common);
    fold_cmd->add_option("--input", input)->required()->check(CLI::ExistingFile);
    fold_cmd->add_option("--out", output)->required();
    auto* unfold_cmd = app.add_subcommand("unfold", "Single-plane VSGM image -> VSGD window");
    add_common(unfold_cmd, common);
    unfold_cmd->add_option("--input", input)->required()->check(CLI::ExistingFile);
    unfold_cmd->add_option("--out", output)->required();
    unfold_cmd->add_option("--geom", geom_text)->required();
    unfold_cmd->add_option("--sample-rate", sample_rate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!common.config.empty()) apply_config(sub, common.config);
        if (sub == eval_cmd && model_path.empty() && !use_oracle && masks_dir.empty())
            throw UsageError("eval needs one of --model, --oracle, --masks");

        const json record{{"command", sub->get_name()}, {"options", resolved(sub)}};
        if (common.run_log.empty()) {
            std::cerr << record.dump() << '\n';
        } else {
            std::ofstream log(common.run_log, std::ios::app);
            log << record.dump() << '\n';
        }

        if (sub == synth) {
            const FoldGeometry g = parse_geom(geom_text);
            auto profiles = shift_bands(default_profiles(double(g.w()) / sample_rate), band_shift);
            SynthConfig cfg;
            cfg.count_per_class = per_class;
            cfg.background_windows = background;
            cfg.noise_floor = noise_floor;
            cfg.sample_rate_hz = sample_rate;
            cfg.seed = common.seed;
            auto rows = store_windows(synth_out, synth_corpus(profiles, cfg, g), volcano, split);
            if (test_per_class > 0) {
                cfg.count_per_class = test_per_class;
                cfg.seed = common.seed + 1;
                cfg.id_prefix = "syntest";
                const auto more = store_windows(synth_out, synth_corpus(profiles, cfg, g), volcano, "test");
                rows.insert(rows.end(), more.begin(), more.end());
            }
            write_manifest(fs::path(synth_out) / "manifest.jsonl", rows);
            std::cout << json{{"manifest", (fs::path(synth_out) / "manifest.jsonl").string()}, {"windows", rows.size()}}
                             .dump()
                      << '\n';
        } else if (sub == prepare) {
            auto pool = load(manifest, in_split);
            std::mt19937_64 rng(common.seed);
            std::map<ClassLabel, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label()].push_back(i);
            std::vector<LabeledWindow> train_pool, val, test;
            for (auto& [label, idx] : by_class) {
                std::shuffle(idx.begin(), idx.end(), rng);
                if (idx.size() <= val_per_class + test_count)
                    throw DomainError("class " + std::string(label_name(label)) + " has " + std::to_string(idx.size()) +
                                      " windows, not enough for " + std::to_string(test_count) + " test + " +
                                      std::to_string(val_per_class) + " val plus training");
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    auto& dst = k < test_count ? test : k < test_count + val_per_class ? val : train_pool;
                    dst.push_back(pool[idx[k]]);
                }
            }
            const auto balanced = balance_classes(train_pool, train_per_class, common.seed + 1);
            std::vector<LabeledWindow> train_set;
            std::map<std::string, int> copies;
            for (const auto& lw : balanced) {
                // Augmented copies keep their source id; make file names unique.
                const int k = copies[lw.window.window_id()]++;
                train_set.push_back(k == 0 ? lw
                                           : LabeledWindow{lw.window.with_id(lw.window.window_id() + "_aug" +
                                                                             std::to_string(k)),
                                                           lw.annotations});
            }
            const std::string tag = read_manifest(manifest).front().volcano;
            auto rows = store_windows(prep_out, train_set, tag, "train");
            for (auto [set, name] : {std::pair{&val, "val"}, std::pair{&test, "test"}}) {
                const auto more = store_windows(prep_out, *set, tag, name);
                rows.insert(rows.end(), more.begin(), more.end());
            }
            write_manifest(fs::path(prep_out) / "manifest.jsonl", rows);
            std::cout << json{{"train", train_set.size()}, {"val", val.size()}, {"test", test.size()}}.dump() << '\n';
        } else if (sub == train_cmd) {
            const auto windows = load(manifest, train_split);
            const FoldGeometry g = geometry_of(windows);
            UNet net = init_model.empty() ? UNet(model.spec(), common.seed) : load_model(init_model);
            const auto data = make_training_set(windows, g, chain.get(), common.threads);
            const auto result = train(net, data, trainer.get(common.seed, common.threads),
                                      [](int epoch, double loss, const UNet&) {
                                          std::cerr << json{{"epoch", epoch}, {"loss", loss}}.dump() << '\n';
                                      });
            save_model(model_out, net);
            if (!loss_csv.empty()) {
                auto out = open_out(loss_csv);
                out << "epoch,loss,lr\n";
                for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
                    out << e << ',' << result.loss_trace[e] << ',' << result.lr_trace[e] << '\n';
            }
            std::cout << json{{"model", model_out}, {"final_loss", result.loss_trace.back()}}.dump() << '\n';
        } else if (sub == infer) {
            const UNet net = load_model(model_path);
            std::ofstream file;
            if (!infer_out.empty()) file = open_out(infer_out);
            std::ostream& out = infer_out.empty() ? std::cout : file;
            if (format == "csv") write_csv_header(out);
            auto emit = [&](const std::string& id, const EventDetection& d, double fs_hz, double start) {
                const DetectionRecord rec{id, d, fs_hz, start};
                if (format == "csv")
                    write_csv(out, rec);
                else
                    write_jsonl(out, rec);
            };
            const int sources = int(!inputs.empty()) + int(!manifest.empty()) + int(from_stdin);
            if (sources != 1) throw UsageError("infer needs exactly one of --input, --manifest, --stream");
            if (from_stdin) {
                const FoldGeometry g = parse_geom(geom_text);
                const RawStreamHeader head = read_stream_header(std::cin);
                if (head.channels != g.s())
                    throw DomainError("stream has " + std::to_string(head.channels) + " channels but --geom expects " +
                                      std::to_string(g.s()));
                StreamConfig cfg{hop, chain.get(), common.threads};
                StreamDetector det(net, g, cfg, head.sample_rate_hz);
                while (true) {
                    const Array2D frames = read_stream_frames(std::cin, head.channels, chunk);
                    if (frames.cols() == 0) break;
                    det.push(frames);
                    for (const auto& d : det.drain()) emit("stream", d, head.sample_rate_hz, head.start_epoch_s);
                    out.flush();
                }
                for (const auto& d : det.finish()) emit("stream", d, head.sample_rate_hz, head.start_epoch_s);
                const auto& st = det.stats();
                std::cerr << json{{"samples", st.samples}, {"windows", st.windows}, {"seconds", st.seconds},
                                  {"realtime_factor", st.realtime_factor()}}
                                 .dump()
                          << '\n';
            } else {
                std::vector<LabeledWindow> windows;
                if (!manifest.empty())
                    windows = load(manifest, eval_split);
                else
                    for (const auto& p : inputs) windows.push_back(read_window_file(p));
                for (const auto& lw : windows) {
                    const FoldGeometry g(lw.window.stations(), lw.window.length());
                    for (const auto& d : detect_window(lw.window, g, net, chain.get()))
                        emit(lw.window.window_id(), d, lw.window.sample_rate_hz(), lw.window.start_epoch_s());
                }
            }
        } else if (sub == eval_cmd) {
            const auto windows = load(manifest, eval_split);
            const FoldGeometry g = geometry_of(windows);
            const EvalConfig cfg{chain.get(), common.threads};
            EvalReport report;
            if (!model_path.empty()) {
                const UNet net = load_model(model_path);
                report = evaluate(windows, g, net, cfg);
            } else {
                const MaskProvider masks = use_oracle ? oracle_masks(g) : imported_masks(masks_dir);
                report = f1_report(evaluate_windows(windows, g, masks, cfg));
            }
            if (!json_out.empty()) {
                auto out = open_out(json_out);
                write_report_json(out, report);
            }
            if (!csv_out.empty()) {
                auto out = open_out(csv_out);
                write_reports_csv(out, std::span<const EvalReport>(&report, 1));
            }
            print_summary(report);
        } else if (sub == sweep) {
            const auto windows = load(manifest, eval_split);
            const FoldGeometry g = geometry_of(windows);
            const UNet net = load_model(model_path);
            const auto reports = noise_sweep(windows, g, net, EvalConfig{chain.get(), common.threads}, common.seed);
            {
                auto out = open_out(csv_out);
                write_sweep_csv(out, reports);
            }
            if (!json_out.empty()) {
                auto out = open_out(json_out);
                write_reports_json(out, reports);
            }
            std::cout << json{{"rows", reports.size()}, {"csv", csv_out}}.dump() << '\n';
        } else if (sub == flex) {
            std::vector<LabeledWindow> corpus;
            if (volcano_filter.empty()) {
                corpus = load(manifest, in_split);
            } else {
                const fs::path dir = fs::path(manifest).parent_path();
                for (const auto& e : read_manifest(manifest))
                    if (e.volcano == volcano_filter && (in_split.empty() || e.split == in_split)) {
                        auto lw = read_window_file(dir / e.path);
                        lw.window = lw.window.with_id(e.window_id);
                        corpus.push_back(std::move(lw));
                    }
                if (corpus.empty()) throw DomainError("no windows tagged with volcano '" + volcano_filter + "'");
            }
            const FoldGeometry g = geometry_of(corpus);
            const UNet base = load_model(model_path);
            FlexConfig cfg;
            cfg.fractions = fractions;
            cfg.train = trainer.get(common.seed, common.threads);
            cfg.eval = EvalConfig{chain.get(), common.threads};
            cfg.trace_every = trace_every;
            cfg.seed = common.seed;
            const FlexResult result = flexibility_protocol(base, corpus, g, cfg);
            const fs::path dir(flex_out);
            fs::create_directories(dir);
            {
                std::ofstream out(dir / "reports.json");
                write_reports_json(out, result.reports);
            }
            {
                std::ofstream out(dir / "reports.csv");
                write_reports_csv(out, result.reports);
            }
            {
                std::ofstream out(dir / "traces.csv");
                write_traces_csv(out, cfg.fractions, result.traces);
            }
            json sizes;
            sizes["test"] = result.sizes.test;
            sizes["finetune"] = result.sizes.finetune;
            std::cout << sizes.dump() << '\n';
        } else if (sub == fold_cmd) {
            const auto lw = read_window_file(input);
            const FoldGeometry g(lw.window.stations(), lw.window.length());
            const Array2D image = fold(lw.window.samples(), g);
            write_mask_file(output, std::span<const Array2D>(&image, 1));
        } else if (sub == unfold_cmd) {
            const FoldGeometry g = parse_geom(geom_text);
            const auto planes = read_mask_file(input);
            if (planes.size() != 1)
                throw DomainError("unfold expects a single-plane image, got " + std::to_string(planes.size()) + " planes");
            if (std::size_t(planes[0].rows()) != g.n())
                throw DomainError("image side " + std::to_string(planes[0].rows()) + " does not match N = " +
                                  std::to_string(g.n()) + " for --geom " + geom_text);
            const LabeledWindow lw{WindowBatch(unfold_to_channels(planes[0], g), {}, sample_rate,
                                               fs::path(output).stem().string()),
                                   {}};
            write_window_file(output, lw);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << json{{"error", "domain"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const FormatError& e) {
        std::cerr << json{{"error", "format"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const TrainingError& e) {
        std::cerr << json{{"error", "training"}, {"epoch", e.epoch()}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
