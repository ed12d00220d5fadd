// Command-line front end: dataset ingestion, feature extraction, rendering,
// training, evaluation and the band/frame/rate sweep.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpser/audio.hpp"
#include "hpser/classifier.hpp"
#include "hpser/dataset.hpp"
#include "hpser/featuremap.hpp"
#include "hpser/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed2(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("0");
}

// Optional JSON config; command-line flags override its values.
json load_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw hpser::Error(std::string("cannot open config: ") + argv[i + 1]);
            json j = json::parse(in);
            if (!j.is_object()) throw hpser::Error("config must be a JSON object");
            return j;
        }
    }
    return json::object();
}

std::string sanitize_for_filename(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return out;
}

void print_confusion(const hpser::EvalReport& report) {
    static const char* names[] = {"Anger",     "Boredom", "Disgust", "Fear",
                                  "Happiness", "Neutral", "Sadness"};
    std::printf("%-10s", "Emotion:");
    for (const char* n : names) std::printf("%11s", n);
    std::printf("\n");
    for (size_t c = 0; c < hpser::kNumEmotions; ++c) {
        std::printf("%-10s", names[c]);
        for (size_t p = 0; p < hpser::kNumEmotions; ++p)
            std::printf("%11s", fixed2(report.confusion[c][p]).c_str());
        std::printf("\n");
    }
    std::printf("overall accuracy: %s%%\n", fixed2(report.overall_accuracy * 100.0).c_str());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw hpser::Error("cannot write " + path);
    out << text;
    if (!out) throw hpser::Error("short write: " + path);
}

hpser::TrainConfig parse_split(hpser::TrainConfig cfg, const std::string& split) {
    double a = 0, b = 0, c = 0;
    if (std::sscanf(split.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
        throw hpser::Error("--split expects three comma-separated fractions");
    cfg.train_fraction = a;
    cfg.val_fraction = b;
    cfg.test_fraction = c;
    return cfg;
}

std::vector<hpser::SweepCell> parse_grid(const std::vector<std::string>& cells) {
    std::vector<hpser::SweepCell> grid;
    for (const std::string& cell : cells) {
        size_t start = 0;
        std::string chunk = cell;
        while (start < chunk.size()) {
            size_t semi = chunk.find(';', start);
            std::string one = chunk.substr(start, semi == std::string::npos ? semi : semi - start);
            unsigned long bands = 0, frames = 0;
            long rate = 0;
            if (std::sscanf(one.c_str(), "%lu,%lu,%ld", &bands, &frames, &rate) != 3)
                throw hpser::Error("grid cell '" + one + "' is not bands,frames,rate");
            grid.push_back({size_t(bands), size_t(frames), int(rate)});
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
    }
    return grid;
}

struct EmbedderChoice {
    std::string mode = "pool"; // pool | import
    std::string import_path;
};

std::vector<hpser::LabeledEmbedding> gather_embeddings(const std::string& maps_path,
                                                       const EmbedderChoice& embedder) {
    if (embedder.mode == "import") {
        if (embedder.import_path.empty())
            throw hpser::Error("--import <file> is required with --embedder import");
        return hpser::import_embeddings(embedder.import_path);
    }
    if (embedder.mode != "pool") throw hpser::Error("unknown embedder '" + embedder.mode + "'");
    if (maps_path.empty()) throw hpser::Error("the pool embedder needs --maps <file>");
    std::vector<hpser::FeatureMap> maps = hpser::load_maps(maps_path);
    return hpser::embed_maps(maps);
}

} // namespace

int main(int argc, char** argv) {
    try {
        const json cfg = load_config(argc, argv);
        auto cfg_num = [&](const char* key, double fallback) {
            return cfg.contains(key) ? cfg[key].get<double>() : fallback;
        };
        auto cfg_str = [&](const char* key, std::string fallback) {
            return cfg.contains(key) ? cfg[key].get<std::string>() : fallback;
        };

        CLI::App app{"Harmonic/percussive Mel feature maps with an MLP emotion classifier"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "JSON config file; flags override its values");

        // Shared option state, config-seeded.
        hpser::FeatureMapSpec spec;
        spec.bands = size_t(cfg_num("bands", 128));
        spec.frames = size_t(cfg_num("frames", 128));
        spec.sample_rate = int(cfg_num("rate", 88200));
        spec.window_size = size_t(cfg_num("window", 2048));
        size_t analysis_hop = size_t(cfg_num("analysis-hop", 0));       // 0 = window size
        size_t sub_hop_frames = size_t(cfg_num("subsample-hop", 0));    // 0 = frames

        hpser::HpssConfig hpss_cfg;
        hpss_cfg.kernel_time = size_t(cfg_num("kernel-time", 31));
        hpss_cfg.kernel_freq = size_t(cfg_num("kernel-freq", 31));
        hpss_cfg.mask_power = cfg_num("mask-power", 2.0);
        hpss_cfg.epsilon = cfg_num("epsilon", 1e-10);
        std::string mask_mode = cfg_str("mask-mode", "soft");
        bool raw_medians = cfg.value("raw-medians", false);

        hpser::TrainConfig train_cfg;
        train_cfg.learning_rate = cfg_num("lr", 1e-4);
        train_cfg.batch_size = size_t(cfg_num("batch", 128));
        train_cfg.epochs = size_t(cfg_num("epochs", 128));
        train_cfg.seed = uint64_t(cfg_num("seed", 0));
        std::string split = cfg_str("split", "0.8,0.1,0.1");

        auto add_spec_options = [&](CLI::App* cmd) {
            cmd->add_option("--bands", spec.bands, "Mel bands per map");
            cmd->add_option("--frames", spec.frames, "frames per map");
            cmd->add_option("--rate", spec.sample_rate, "analysis sample rate (Hz)");
            cmd->add_option("--window", spec.window_size, "STFT window size (samples)");
            cmd->add_option("--analysis-hop", analysis_hop,
                            "STFT hop (samples); defaults to the window size");
            cmd->add_option("--subsample-hop", sub_hop_frames,
                            "subsample advance in frames; defaults to --frames");
            cmd->add_option("--kernel-time", hpss_cfg.kernel_time, "median length along time");
            cmd->add_option("--kernel-freq", hpss_cfg.kernel_freq, "median length along frequency");
            cmd->add_option("--mask-power", hpss_cfg.mask_power, "soft mask exponent");
            cmd->add_option("--mask-mode", mask_mode, "soft | binary");
            cmd->add_option("--epsilon", hpss_cfg.epsilon, "soft mask regularizer");
            cmd->add_flag("--raw-medians", raw_medians,
                          "emit median-enhanced grids instead of masked ones");
        };
        auto add_train_options = [&](CLI::App* cmd) {
            cmd->add_option("--lr", train_cfg.learning_rate, "Adam learning rate");
            cmd->add_option("--batch", train_cfg.batch_size, "mini-batch size");
            cmd->add_option("--epochs", train_cfg.epochs, "training epochs");
            cmd->add_option("--seed", train_cfg.seed, "run seed");
            cmd->add_option("--split", split, "train,val,test fractions");
        };
        auto finish_spec = [&]() {
            spec.analysis_hop = analysis_hop == 0 ? spec.window_size : analysis_hop;
            spec.subsample_hop_frames = sub_hop_frames == 0 ? spec.frames : sub_hop_frames;
            hpss_cfg.raw_medians = raw_medians;
            if (mask_mode == "soft")
                hpss_cfg.mask_mode = hpser::MaskMode::soft;
            else if (mask_mode == "binary")
                hpss_cfg.mask_mode = hpser::MaskMode::binary;
            else
                throw hpser::Error("unknown mask mode '" + mask_mode + "'");
        };

        // ingest ------------------------------------------------------------
        auto* ingest = app.add_subcommand("ingest", "build a manifest from a corpus directory");
        std::string ingest_dir, ingest_manifest, ingest_out = cfg_str("out", "manifest.csv");
        ingest->add_option("--dir", ingest_dir, "directory of WAV files");
        ingest->add_option("--manifest", ingest_manifest,
                           "validate an existing manifest CSV instead of using the filename rule");
        ingest->add_option("--out", ingest_out, "manifest output path");

        // extract -----------------------------------------------------------
        auto* extract = app.add_subcommand("extract", "extract feature maps from a manifest");
        std::string extract_manifest, extract_out = cfg_str("out", "maps.fmap");
        extract->add_option("--manifest", extract_manifest, "manifest CSV")->required();
        extract->add_option("--out", extract_out, "output map container");
        add_spec_options(extract);

        // render ------------------------------------------------------------
        auto* render = app.add_subcommand("render", "render feature maps to PNG images");
        std::string render_maps, render_out = cfg_str("out", "render");
        std::string colormap = cfg_str("colormap", "heat");
        render->add_option("--maps", render_maps, "map container")->required();
        render->add_option("--out", render_out, "output directory");
        render->add_option("--colormap", colormap, "grayscale | heat");

        // train ---------------------------------------------------------------
        auto* train_cmd = app.add_subcommand("train", "train the emotion classifier");
        std::string train_maps, model_out = cfg_str("model-out", "model.mlpc");
        std::string report_out = cfg_str("report-out", "report");
        EmbedderChoice embedder;
        embedder.mode = cfg_str("embedder", "pool");
        train_cmd->add_option("--maps", train_maps, "map container (pool embedder)");
        train_cmd->add_option("--embedder", embedder.mode, "pool | import");
        train_cmd->add_option("--import", embedder.import_path, "embedding exchange file");
        train_cmd->add_option("--model-out", model_out, "checkpoint output path");
        train_cmd->add_option("--report-out", report_out, "report basename (.csv/.json appended)");
        add_train_options(train_cmd);

        // eval ----------------------------------------------------------------
        auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
        std::string eval_maps, eval_model, eval_report = cfg_str("report-out", "eval-report");
        EmbedderChoice eval_embedder;
        eval_embedder.mode = cfg_str("embedder", "pool");
        eval_cmd->add_option("--maps", eval_maps, "map container (pool embedder)");
        eval_cmd->add_option("--embedder", eval_embedder.mode, "pool | import");
        eval_cmd->add_option("--import", eval_embedder.import_path, "embedding exchange file");
        eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
        eval_cmd->add_option("--report-out", eval_report, "report basename");

        // sweep ---------------------------------------------------------------
        auto* sweep = app.add_subcommand("sweep", "extract + train across a parameter grid");
        std::string sweep_manifest, sweep_out = cfg_str("out", "sweep.csv");
        std::vector<std::string> grid_args;
        sweep->add_option("--manifest", sweep_manifest, "manifest CSV")->required();
        sweep->add_option("--grid", grid_args,
                          "grid cells bands,frames,rate (repeat or separate with ';')")
            ->required();
        sweep->add_option("--out", sweep_out, "sweep table output");
        add_spec_options(sweep);
        add_train_options(sweep);

        // Let app-level options (--config) appear after the subcommand name.
        for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

        CLI11_PARSE(app, argc, argv);

        if (ingest->parsed()) {
            hpser::DatasetManifest manifest;
            std::vector<std::string> skipped;
            if (!ingest_manifest.empty()) {
                manifest = hpser::read_manifest_csv(ingest_manifest);
            } else {
                if (ingest_dir.empty())
                    throw hpser::Error("ingest needs --dir or --manifest");
                hpser::IngestResult result = hpser::ingest_directory(ingest_dir);
                manifest = std::move(result.manifest);
                skipped = std::move(result.skipped);
            }
            hpser::write_manifest_csv(manifest, ingest_out);
            std::printf("manifest: %zu files -> %s\n", manifest.rows.size(), ingest_out.c_str());
            for (const std::string& s : skipped)
                std::fprintf(stderr, "skipped (no label rule match): %s\n", s.c_str());
            return 0;
        }

        if (extract->parsed()) {
            finish_spec();
            hpser::DatasetManifest manifest = hpser::read_manifest_csv(extract_manifest);
            std::vector<hpser::FeatureMap> maps;
            hpser::ExtractSummary summary =
                hpser::extract_dataset(manifest, spec, hpss_cfg, maps);
            hpser::save_maps(maps, extract_out);
            std::printf("%zu maps from %zu files -> %s\n", summary.maps_written,
                        summary.files_processed, extract_out.c_str());
            for (size_t c = 0; c < hpser::kNumEmotions; ++c)
                if (summary.per_class_maps[c] > 0)
                    std::printf("  %-10s %zu\n", hpser::to_string(hpser::EmotionLabel(c)),
                                summary.per_class_maps[c]);
            for (const auto& failure : summary.failures)
                std::fprintf(stderr, "failed: %s: %s\n", failure.path.c_str(),
                             failure.reason.c_str());
            return summary.failures.empty() ? 0 : 1;
        }

        if (render->parsed()) {
            hpser::Colormap cm;
            if (colormap == "grayscale")
                cm = hpser::Colormap::grayscale;
            else if (colormap == "heat")
                cm = hpser::Colormap::heat;
            else
                throw hpser::Error("unknown colormap '" + colormap + "'");
            std::vector<hpser::FeatureMap> maps = hpser::load_maps(render_maps);
            fs::create_directories(render_out);
            size_t written = 0;
            for (size_t i = 0; i < maps.size(); ++i) {
                for (size_t channel = 0; channel < 2; ++channel) {
                    char name[512];
                    std::snprintf(name, sizeof(name), "%s/%05zu_%s_ch%zu.png",
                                  render_out.c_str(), i,
                                  sanitize_for_filename(maps[i].source_id).c_str(), channel);
                    hpser::write_png(hpser::render_channel(maps[i], channel, cm), name);
                    ++written;
                }
            }
            std::printf("%zu PNG files -> %s\n", written, render_out.c_str());
            return 0;
        }

        if (train_cmd->parsed()) {
            hpser::TrainConfig tc = parse_split(train_cfg, split);
            std::vector<hpser::LabeledEmbedding> data = gather_embeddings(train_maps, embedder);
            hpser::TrainResult result = hpser::train(data, tc);
            hpser::save_model(result.model, model_out);
            write_text(report_out + ".csv", hpser::report_csv(result.report));
            write_text(report_out + ".json", hpser::report_json(result.report));
            print_confusion(result.report);
            std::printf("model -> %s, report -> %s.{csv,json}\n", model_out.c_str(),
                        report_out.c_str());
            return 0;
        }

        if (eval_cmd->parsed()) {
            hpser::MlpModel model = hpser::load_model(eval_model);
            std::vector<hpser::LabeledEmbedding> data =
                gather_embeddings(eval_maps, eval_embedder);
            hpser::EvalReport report = hpser::evaluate(model, data);
            write_text(eval_report + ".csv", hpser::report_csv(report));
            write_text(eval_report + ".json", hpser::report_json(report));
            print_confusion(report);
            return 0;
        }

        if (sweep->parsed()) {
            finish_spec();
            hpser::TrainConfig tc = parse_split(train_cfg, split);
            hpser::DatasetManifest manifest = hpser::read_manifest_csv(sweep_manifest);
            std::vector<hpser::SweepCell> grid = parse_grid(grid_args);
            std::vector<hpser::SweepRow> rows =
                hpser::run_sweep(manifest, grid, spec, hpss_cfg, tc);
            const std::string csv = hpser::sweep_csv(rows);
            write_text(sweep_out, csv);
            std::fputs(csv.c_str(), stdout);
            bool any_error = false;
            for (const hpser::SweepRow& row : rows) any_error |= !row.ok;
            return any_error ? 1 : 0;
        }

        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
