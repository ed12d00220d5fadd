#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpser/classifier.hpp"
#include "hpser/featuremap.hpp"

namespace hpser {

struct ManifestRow {
    std::string path;
    EmotionLabel label;
    std::string speaker; // optional grouping key, empty when absent
};

struct DatasetManifest {
    std::vector<ManifestRow> rows;
};

// CSV with columns path,label[,speaker] and no quoting. Lines starting with
// '#' and a leading "path,label" header are ignored. Duplicate paths or
// unknown label names are rejected (UnknownLabelCode).
DatasetManifest read_manifest_csv(const std::string& path);
void write_manifest_csv(const DatasetManifest& manifest, const std::string& path);

// Berlin-corpus naming convention: the 6th character of the file stem selects
// the emotion (W anger, L boredom, E disgust, A fear, F happiness, T sadness,
// N neutral) and the first two characters name the speaker.
std::optional<EmotionLabel> label_from_emodb_stem(std::string_view stem);

struct IngestResult {
    DatasetManifest manifest;
    std::vector<std::string> skipped; // files the naming rule could not label
};

// Scans a directory for .wav files (sorted by name for determinism) and
// labels them with the filename rule above. Throws NoFilesFound when the
// directory holds no WAV files.
IngestResult ingest_directory(const std::string& dir);

struct ExtractFailure {
    std::string path;
    std::string reason;
};

struct ExtractSummary {
    size_t files_processed = 0;
    size_t maps_written = 0;
    std::array<size_t, kNumEmotions> per_class_maps{};
    std::vector<ExtractFailure> failures;
};

// Runs decode -> resample -> subsample -> feature map for every manifest row.
// Per-file failures are recorded and do not abort the batch. Map source ids
// are "<stem>#<subsample index>".
ExtractSummary extract_dataset(const DatasetManifest& manifest, const FeatureMapSpec& spec,
                               const HpssConfig& hpss_cfg, std::vector<FeatureMap>& out_maps);

// Embeds every labeled map with the pooling embedder. Unlabeled maps are
// rejected since training needs targets.
std::vector<LabeledEmbedding> embed_maps(std::span<const FeatureMap> maps);

struct SweepCell {
    size_t bands = 0;
    size_t frames = 0;
    int sample_rate = 0;
};

struct SweepRow {
    SweepCell cell;
    bool ok = false;
    double accuracy = 0.0; // fraction, valid when ok
    std::string error;     // reason, when !ok
};

// Extract + train once per grid cell with a shared seed; failures become
// error rows and the sweep continues.
std::vector<SweepRow> run_sweep(const DatasetManifest& manifest, std::span<const SweepCell> grid,
                                const FeatureMapSpec& base_spec, const HpssConfig& hpss_cfg,
                                const TrainConfig& train_cfg);

// CSV with the columns Band, Frame, Sample rate, Accuracy (percent cells).
std::string sweep_csv(std::span<const SweepRow> rows);

} // namespace hpser
