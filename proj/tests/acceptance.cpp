// Acceptance suite: one self-contained check per release criterion, each
// printed as a PASS/FAIL line with its runtime. Exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hpser/binio.hpp"

#include "hpser/audio.hpp"
#include "hpser/classifier.hpp"
#include "hpser/dataset.hpp"
#include "hpser/featuremap.hpp"
#include "hpser/hpss.hpp"
#include "hpser/melbank.hpp"
#include "hpser/rng.hpp"
#include "hpser/spectral.hpp"

using namespace hpser;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// --- criterion bodies -------------------------------------------------------

void window_correctness() {
    WindowFunction w = hanning(129);
    check(w.coeff[0] == 0.0, "endpoint n=0 not zero");
    check(w.coeff[128] == 0.0, "endpoint n=128 not zero");
    check(std::abs(w.coeff[64] - 1.0) <= 1e-12, "midpoint n=64 not 1");
    check(std::abs(w.coeff[32] - 0.5) <= 1e-12, "quarter point n=32 not 0.5");
    check(std::abs(w.coeff[96] - 0.5) <= 1e-12, "quarter point n=96 not 0.5");
    for (size_t n = 0; n < 129; ++n)
        check(std::abs(w.coeff[n] - w.coeff[128 - n]) <= 1e-12, "window asymmetric");
}

void stft_parseval() {
    Rng rng(20240001);
    const size_t fft_sizes[] = {256, 512, 1024, 2048};
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = fft_sizes[trial % 4];
        const size_t hop = trial % 2 == 0 ? n / 2 : n / 4;
        const size_t len = 500 + size_t(rng.next_below(5500));
        AudioBuffer buf;
        buf.sample_rate = 88200;
        buf.samples.resize(len);
        for (double& v : buf.samples) v = rng.uniform(-0.9, 0.9);

        WindowFunction w = hanning(n);
        ComplexSpectrogram spec = stft(buf, n, hop, w);
        for (size_t frame = 0; frame < spec.num_frames; ++frame) {
            double time_energy = 0.0;
            for (size_t r = 0; r < n; ++r) {
                const size_t idx = frame * hop + r;
                if (idx >= len) break;
                const double s = w.coeff[r] * buf.samples[idx];
                time_energy += s * s;
            }
            double freq_energy = 0.0;
            for (size_t k = 0; k < spec.num_bins; ++k) {
                const double mag2 = std::norm(spec.at(frame, k));
                freq_energy += (k == 0 || k == spec.num_bins - 1) ? mag2 : 2.0 * mag2;
            }
            const double expect = double(n) * time_energy;
            check(std::abs(freq_energy - expect) <= 1e-6 * std::max(expect, 1e-12),
                  "Parseval identity violated at frame " + std::to_string(frame) + ": " +
                      fmt(freq_energy) + " vs " + fmt(expect));
        }
    }
}

void filterbank_partition_of_unity() {
    MelFilterbank fb = build_filterbank(88200, 2048, 128, 0.0, 44100.0);
    const double mel_step = hz_to_mel(44100.0) / 129.0;
    const double first_center = mel_to_hz(mel_step);
    const double last_center = mel_to_hz(mel_step * 128.0);
    size_t checked = 0;
    for (size_t k = 0; k < fb.num_bins; ++k) {
        const double f = 88200.0 / 2048.0 * double(k);
        if (f <= first_center || f >= last_center) continue;
        double sum = 0.0;
        for (size_t b = 0; b < fb.num_bands; ++b) sum += fb.weight(b, k);
        check(std::abs(sum - 1.0) <= 1e-6,
              "band sum " + fmt(sum) + " at bin " + std::to_string(k));
        ++checked;
    }
    check(checked == 990, "expected 990 bins strictly between the outer band centers, saw " +
                              std::to_string(checked));
}

MelSpectrogram synthetic_grid(Rng& rng) {
    // Background noise splits evenly between the sides, so it stays two
    // decades below the synthetic ridge energy.
    MelSpectrogram s;
    s.num_bands = 128;
    s.num_frames = 128;
    s.sample_rate = 88200;
    s.values.resize(128 * 128);
    for (double& v : s.values) v = rng.uniform(0.0, 0.001);
    return s;
}

void hpss_separation() {
    Rng rng(20240002);

    // Sustained ridge -> harmonic side.
    MelSpectrogram tone = synthetic_grid(rng);
    for (size_t n = 0; n < 128; ++n) tone.at(37, n) = 1.0;
    HpssPair tone_pair = decompose(tone, {});
    const double tone_total = std::accumulate(tone.values.begin(), tone.values.end(), 0.0);
    const double tone_h =
        std::accumulate(tone_pair.harmonic.values.begin(), tone_pair.harmonic.values.end(), 0.0);
    check(tone_h >= 0.9 * tone_total,
          "tone ridge routed only " + fmt(tone_h / tone_total) + " of the energy to H");

    // Broadband impulse -> percussive side.
    MelSpectrogram click = synthetic_grid(rng);
    for (size_t b = 0; b < 128; ++b) click.at(b, 88) = 1.0;
    HpssPair click_pair = decompose(click, {});
    const double click_total = std::accumulate(click.values.begin(), click.values.end(), 0.0);
    const double click_p = std::accumulate(click_pair.percussive.values.begin(),
                                           click_pair.percussive.values.end(), 0.0);
    check(click_p >= 0.9 * click_total,
          "impulse routed only " + fmt(click_p / click_total) + " of the energy to P");

    // Soft masks reconstruct the input wherever it has energy.
    MelSpectrogram random_grid = synthetic_grid(rng);
    for (double& v : random_grid.values) v = rng.uniform(0.0, 2.0);
    HpssPair soft = decompose(random_grid, {});
    for (size_t i = 0; i < random_grid.values.size(); ++i) {
        if (random_grid.values[i] <= 1e-8) continue;
        const double recon = soft.harmonic.values[i] + soft.percussive.values[i];
        check(std::abs(recon - random_grid.values[i]) <= 1e-6 * random_grid.values[i],
              "soft reconstruction off at cell " + std::to_string(i));
    }

    // Binary masks partition, so the averaged output is exactly S/2.
    HpssConfig binary;
    binary.mask_mode = MaskMode::binary;
    MelSpectrogram avg = averaged_hp(decompose(random_grid, binary));
    for (size_t i = 0; i < random_grid.values.size(); ++i)
        check(avg.values[i] == random_grid.values[i] / 2.0,
              "binary-mask average is not exactly S/2 at cell " + std::to_string(i));
}

void feature_map_geometry() {
    FeatureMapSpec spec; // 128 x 128 @ 88200, window 2048
    check(spec.subsample_samples() == 262144, "subsample span is not 262144 samples");
    const double seconds = double(spec.subsample_samples()) / spec.sample_rate;
    check(std::abs(seconds - 2.9) <= 0.1,
          "subsample duration " + fmt(seconds) + "s is not 2.9s within 0.1s");

    Rng rng(20240003);
    AudioBuffer sub;
    sub.sample_rate = spec.sample_rate;
    sub.samples.resize(spec.subsample_samples());
    for (double& v : sub.samples) v = rng.uniform(-0.5, 0.5);
    FeatureMap map = build_feature_map(sub, spec, {});
    check(map.bands == 128 && map.frames == 128, "map is not 128 x 128");
    check(map.channels[0].size() == 128 * 128 && map.channels[1].size() == 128 * 128,
          "channels do not hold 128 x 128 cells");
}

void serialization_round_trip() {
    Rng rng(20240004);
    std::vector<FeatureMap> maps;
    maps.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
        FeatureMap map;
        map.bands = 12;
        map.frames = 10;
        for (auto& ch : map.channels) {
            ch.resize(120);
            for (auto& v : ch) v = float(rng.next_unit());
        }
        if (i % 9 != 0) map.label = EmotionLabel(rng.next_below(kNumEmotions));
        map.source_id = "clip_" + std::to_string(i) + "#0";
        maps.push_back(std::move(map));
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "hpser_acceptance_corpus.fmap").string();
    save_maps(maps, path);
    std::vector<FeatureMap> loaded = load_maps(path);
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    std::filesystem::remove(path);
    check(loaded.size() == maps.size(), "map count changed across the round trip");
    for (size_t i = 0; i < maps.size(); ++i) {
        check(loaded[i].channels[0] == maps[i].channels[0] &&
                  loaded[i].channels[1] == maps[i].channels[1] &&
                  loaded[i].label == maps[i].label && loaded[i].source_id == maps[i].source_id,
              "map " + std::to_string(i) + " not bit-identical after the round trip");
    }

    size_t detected = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<uint8_t> corrupted = bytes;
        const size_t bit = size_t(rng.next_below(corrupted.size() * 8));
        corrupted[bit / 8] ^= uint8_t(1u << (bit % 8));
        try {
            decode_maps(corrupted);
        } catch (const Error&) {
            ++detected;
        }
    }
    check(detected == 100,
          "single-bit corruption detected in only " + std::to_string(detected) + "/100 trials");
}

void mlp_gradient_check() {
    Rng rng(20240005);
    MlpModel model = make_emotion_mlp(91);
    std::vector<LabeledEmbedding> batch;
    for (int i = 0; i < 4; ++i) {
        EmbeddingVector v(kEmbeddingDim);
        for (double& x : v) x = rng.uniform(0.0, 1.0);
        batch.push_back({std::move(v), EmotionLabel(i)});
    }
    const double err = gradient_check(model, batch);
    check(err <= 1e-4, "max relative gradient error " + fmt(err));
}

void overfit_sanity() {
    Rng rng(20240006);
    std::vector<LabeledEmbedding> data;
    const size_t per_class[7] = {5, 5, 5, 5, 4, 4, 4}; // 32 embeddings
    for (size_t c = 0; c < 7; ++c) {
        for (size_t i = 0; i < per_class[c]; ++i) {
            EmbeddingVector v(kEmbeddingDim, 0.0);
            for (size_t d = c * 128; d < (c + 1) * 128; ++d) v[d] = 1.0 + 0.2 * rng.next_unit();
            for (double& x : v) x += 0.02 * rng.next_unit();
            data.push_back({std::move(v), EmotionLabel(c)});
        }
    }

    MlpModel model = make_emotion_mlp(7);
    FitConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 128;
    cfg.epochs = 500;
    cfg.stop_at_full_train_accuracy = true;
    Rng fit_rng(1);
    FitTrace trace = fit(model, data, {}, cfg, fit_rng);

    size_t hits = 0;
    for (const auto& ex : data)
        if (predict(model, ex.values) == ex.label) ++hits;
    check(hits == data.size(), "only " + std::to_string(hits) + "/32 correct after " +
                                   std::to_string(trace.epochs_run) + " epochs");
}

// Four acoustically distinct clip families. Each family keeps its tone
// frequencies and click grid fixed and only jitters amplitudes and phases,
// so its harmonic/percussive channel signature is stable across clips.
AudioBuffer synth_clip(Rng& rng, size_t kind, size_t samples, int rate) {
    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.samples.assign(samples, 0.0);

    auto add_tones = [&](std::initializer_list<double> freqs) {
        for (double freq : freqs) {
            const double amp = rng.uniform(0.08, 0.22);
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            for (size_t i = 0; i < samples; ++i)
                buf.samples[i] += amp * std::sin(2.0 * M_PI * freq * double(i) / rate + phase);
        }
    };
    auto add_clicks = [&](size_t offset) {
        for (size_t at = offset; at < samples; at += 16384) {
            const double amp = rng.uniform(0.5, 0.9);
            for (size_t i = at; i < std::min(samples, at + 96); ++i)
                buf.samples[i] += amp * rng.uniform(-1.0, 1.0);
        }
    };
    auto add_noise = [&](double amp) {
        for (double& v : buf.samples) v += amp * rng.uniform(-1.0, 1.0);
    };

    switch (kind) {
        case 0: add_tones({300.0, 750.0, 1800.0}); break;      // harmonic-dominant
        case 1: add_clicks(3000); add_noise(0.002); break;     // percussive-dominant
        case 2: add_tones({500.0, 1200.0}); add_clicks(8000); break; // mixed
        default: add_noise(rng.uniform(0.15, 0.3)); break;     // stationary noise
    }
    for (double& v : buf.samples) v = std::clamp(v, -1.0, 1.0);
    return buf;
}

void end_to_end_synthetic(std::string& detail) {
    const FeatureMapSpec spec;   // 128 x 128 @ 88200, window 2048
    const HpssConfig hpss_cfg;   // 31 x 31 soft masks
    const EmotionLabel class_labels[4] = {EmotionLabel::anger, EmotionLabel::boredom,
                                          EmotionLabel::disgust, EmotionLabel::fear};

    Rng rng(20240007);
    std::vector<LabeledEmbedding> dataset;
    dataset.reserve(200);
    for (size_t clip = 0; clip < 200; ++clip) {
        const size_t kind = clip % 4;
        AudioBuffer buf = synth_clip(rng, kind, spec.subsample_samples(), spec.sample_rate);
        std::vector<AudioBuffer> subs = subsample(buf, spec);
        check(subs.size() == 1, "clip did not yield exactly one subsample");
        FeatureMap map = build_feature_map(subs[0], spec, hpss_cfg);
        dataset.push_back({pool_embed(map), class_labels[kind]});
    }

    TrainConfig cfg; // architecture defaults: lr 1e-4, batch 128, 128 epochs, 80/10/10
    cfg.seed = 2024;
    TrainResult first = train(dataset, cfg);
    check(first.report.overall_accuracy >= 0.95,
          "test accuracy " + fmt(first.report.overall_accuracy) + " below 0.95");

    TrainResult second = train(dataset, cfg);
    check(encode_model(first.model) == encode_model(second.model),
          "two runs with the same seed diverged");
    check(first.report.overall_accuracy == second.report.overall_accuracy,
          "accuracy changed between identical runs");

    detail = "test accuracy " + fmt(first.report.overall_accuracy) + ", deterministic";
}

void report_formats() {
    Rng rng(20240008);
    // A deliberately imperfect predictor over all seven classes.
    std::vector<LabeledEmbedding> test_set;
    for (size_t c = 0; c < kNumEmotions; ++c) {
        for (int i = 0; i < 3; ++i) {
            EmbeddingVector v(kEmbeddingDim);
            for (double& x : v) x = rng.next_unit();
            test_set.push_back({std::move(v), EmotionLabel(c)});
        }
    }
    MlpModel model = make_emotion_mlp(13);
    EvalReport report = evaluate(model, test_set);

    const std::string csv = report_csv(report);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    check(header == "Emotion,Anger,Boredom,Disgust,Fear,Happiness,Neutral,Sadness",
          "confusion CSV header layout changed: " + header);

    size_t row_count = 0;
    std::string line;
    while (std::getline(lines, line)) {
        ++row_count;
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ','); // emotion name
        double sum = 0.0;
        size_t cell_count = 0;
        while (std::getline(cells, cell, ',')) {
            sum += std::atof(cell.c_str());
            ++cell_count;
        }
        check(cell_count == kNumEmotions, "confusion row has the wrong cell count");
        check(std::abs(sum - 100.0) <= 0.5,
              "printed confusion row sums to " + fmt(sum) + ", not 100 +- 0.5");
    }
    check(row_count == kNumEmotions, "confusion CSV does not hold 7 emotion rows");

    const std::string json = report_json(report);
    for (const char* field : {"overall_accuracy", "per_class_accuracy", "confusion_percent",
                              "class_counts", "total"})
        check(json.find(field) != std::string::npos,
              std::string("report JSON lacks the '") + field + "' field");

    std::vector<SweepRow> rows(1);
    rows[0].cell = {128, 128, 88200};
    rows[0].ok = true;
    rows[0].accuracy = 0.9279;
    const std::string sweep = sweep_csv(rows);
    check(sweep.rfind("Band,Frame,Sample rate,Accuracy\n", 0) == 0,
          "sweep CSV header layout changed");
    check(sweep.find("128,128,88200,92.79%") != std::string::npos,
          "sweep CSV row formatting changed");
}

void emodb_informational(std::string& detail) {
    const char* dir = std::getenv("HPSER_EMODB_DIR");
    if (!dir || !*dir) {
        detail = "HPSER_EMODB_DIR not set; corpus run skipped (informational, not gated)";
        return;
    }
    IngestResult ingest = ingest_directory(dir);
    DatasetManifest manifest = ingest.manifest;
    std::vector<SweepCell> grid = {{128, 128, 88200}};
    FeatureMapSpec spec;
    TrainConfig cfg;
    cfg.seed = 2024;
    std::vector<SweepRow> rows = run_sweep(manifest, grid, spec, {}, cfg);
    if (rows[0].ok)
        detail = "corpus accuracy " + fmt(rows[0].accuracy) + " (no target asserted)";
    else
        detail = "corpus run failed: " + rows[0].error;
}

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<void(std::string&)> run;
};

} // namespace

int main() {
    std::vector<Criterion> criteria = {
        {"window-correctness", 1.0, [](std::string&) { window_correctness(); }},
        {"stft-parseval", 10.0, [](std::string&) { stft_parseval(); }},
        {"filterbank-partition-of-unity", 1.0,
         [](std::string&) { filterbank_partition_of_unity(); }},
        {"hpss-separation", 5.0, [](std::string&) { hpss_separation(); }},
        {"feature-map-geometry", 5.0, [](std::string&) { feature_map_geometry(); }},
        {"serialization-round-trip", 30.0, [](std::string&) { serialization_round_trip(); }},
        {"mlp-gradient-check", 60.0, [](std::string&) { mlp_gradient_check(); }},
        {"overfit-sanity", 60.0, [](std::string&) { overfit_sanity(); }},
        {"end-to-end-synthetic-ser", 300.0, [](std::string& d) { end_to_end_synthetic(d); }},
        {"report-formats", 10.0, [](std::string&) { report_formats(); }},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        std::string verdict = "PASS";
        std::string reason;
        try {
            criterion.run(detail);
        } catch (const std::exception& e) {
            verdict = "FAIL";
            reason = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (verdict == "PASS" && elapsed > criterion.budget_seconds) {
            verdict = "FAIL";
            reason = "exceeded the " + fmt(criterion.budget_seconds) + "s runtime budget";
        }
        std::printf("[%s] %-30s %7.2fs%s%s\n", verdict.c_str(), criterion.name.c_str(), elapsed,
                    detail.empty() && reason.empty() ? "" : "  -- ",
                    (!reason.empty() ? reason : detail).c_str());
        std::fflush(stdout);
        if (verdict == "FAIL") ++failures;
    }

    // Informational corpus run, never gated.
    {
        std::string detail;
        emodb_informational(detail);
        std::printf("[INFO] %-30s         %s\n", "emodb-corpus", detail.c_str());
    }

    if (failures == 0)
        std::printf("all %zu criteria passed\n", criteria.size());
    else
        std::printf("%d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
