#include "hpser/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hpser/audio.hpp"

namespace fs = std::filesystem;

namespace hpser {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

} // namespace

DatasetManifest read_manifest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);

    DatasetManifest manifest;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::vector<std::string> fields = split_csv_line(trimmed);
        if (line_no == 1 && !fields.empty() && fields[0] == "path") continue; // header
        if (fields.size() < 2 || fields.size() > 3)
            throw Error("manifest line " + std::to_string(line_no) +
                        ": expected path,label[,speaker]");

        ManifestRow row;
        row.path = fields[0];
        auto label = emotion_from_string(fields[1]);
        if (!label)
            throw UnknownLabelCode("manifest line " + std::to_string(line_no) +
                                   ": unknown label '" + fields[1] + "'");
        row.label = *label;
        if (fields.size() == 3) row.speaker = fields[2];

        if (!seen.insert(row.path).second)
            throw Error("manifest line " + std::to_string(line_no) + ": duplicate path '" +
                        row.path + "'");
        manifest.rows.push_back(std::move(row));
    }
    if (manifest.rows.empty()) throw NoFilesFound("manifest lists no files: " + path);
    return manifest;
}

void write_manifest_csv(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write manifest: " + path);
    out << "path,label,speaker\n";
    for (const ManifestRow& row : manifest.rows)
        out << row.path << ',' << to_string(row.label) << ',' << row.speaker << '\n';
    if (!out) throw Error("short write: " + path);
}

std::optional<EmotionLabel> label_from_emodb_stem(std::string_view stem) {
    if (stem.size() < 6) return std::nullopt;
    switch (stem[5]) {
        case 'W': return EmotionLabel::anger;
        case 'L': return EmotionLabel::boredom;
        case 'E': return EmotionLabel::disgust;
        case 'A': return EmotionLabel::fear;
        case 'F': return EmotionLabel::happiness;
        case 'T': return EmotionLabel::sadness;
        case 'N': return EmotionLabel::neutral;
        default: return std::nullopt;
    }
}

IngestResult ingest_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);

    std::vector<fs::path> wavs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });
        if (ext == ".wav") wavs.push_back(entry.path());
    }
    if (wavs.empty()) throw NoFilesFound("no WAV files under " + dir);
    std::sort(wavs.begin(), wavs.end());

    IngestResult result;
    for (const fs::path& p : wavs) {
        const std::string stem = p.stem().string();
        auto label = label_from_emodb_stem(stem);
        if (!label) {
            result.skipped.push_back(p.string());
            continue;
        }
        ManifestRow row;
        row.path = p.string();
        row.label = *label;
        row.speaker = stem.substr(0, 2);
        result.manifest.rows.push_back(std::move(row));
    }
    return result;
}

ExtractSummary extract_dataset(const DatasetManifest& manifest, const FeatureMapSpec& spec,
                               const HpssConfig& hpss_cfg, std::vector<FeatureMap>& out_maps) {
    if (manifest.rows.empty()) throw NoFilesFound("manifest lists no files");

    ExtractSummary summary;
    for (const ManifestRow& row : manifest.rows) {
        try {
            AudioBuffer buf = decode_wav_file(row.path);
            buf = resample(buf, spec.sample_rate);
            const std::string stem = fs::path(row.path).stem().string();
            std::vector<AudioBuffer> subs = subsample(buf, spec);
            for (size_t k = 0; k < subs.size(); ++k) {
                FeatureMap map = build_feature_map(subs[k], spec, hpss_cfg);
                map.label = row.label;
                map.source_id = stem + "#" + std::to_string(k);
                out_maps.push_back(std::move(map));
                ++summary.maps_written;
                ++summary.per_class_maps[size_t(row.label)];
            }
            ++summary.files_processed;
        } catch (const std::exception& e) {
            summary.failures.push_back({row.path, e.what()});
        }
    }
    return summary;
}

std::vector<LabeledEmbedding> embed_maps(std::span<const FeatureMap> maps) {
    std::vector<LabeledEmbedding> out;
    out.reserve(maps.size());
    for (const FeatureMap& map : maps) {
        if (!map.label)
            throw MissingClass("map '" + map.source_id + "' carries no label");
        out.push_back({pool_embed(map), *map.label});
    }
    return out;
}

std::vector<SweepRow> run_sweep(const DatasetManifest& manifest, std::span<const SweepCell> grid,
                                const FeatureMapSpec& base_spec, const HpssConfig& hpss_cfg,
                                const TrainConfig& train_cfg) {
    if (grid.empty()) throw Error("empty sweep grid");

    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const SweepCell& cell : grid) {
        SweepRow row;
        row.cell = cell;
        try {
            FeatureMapSpec spec = base_spec;
            spec.bands = cell.bands;
            spec.frames = cell.frames;
            spec.sample_rate = cell.sample_rate;
            spec.analysis_hop = spec.window_size;
            spec.subsample_hop_frames = cell.frames;

            std::vector<FeatureMap> maps;
            ExtractSummary summary = extract_dataset(manifest, spec, hpss_cfg, maps);
            if (maps.empty())
                throw Error(summary.failures.empty()
                                ? "no maps extracted"
                                : "no maps extracted; first failure: " +
                                      summary.failures.front().reason);
            TrainResult result = train(embed_maps(maps), train_cfg);
            row.ok = true;
            row.accuracy = result.report.overall_accuracy;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "Band,Frame,Sample rate,Accuracy\n";
    for (const SweepRow& row : rows) {
        out += std::to_string(row.cell.bands);
        out += ',';
        out += std::to_string(row.cell.frames);
        out += ',';
        out += std::to_string(row.cell.sample_rate);
        out += ',';
        if (row.ok) {
            char buf[32];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), row.accuracy * 100.0,
                                           std::chars_format::fixed, 2);
            out.append(buf, ptr);
            out += '%';
        } else {
            std::string reason = row.error;
            for (char& c : reason)
                if (c == ',' || c == '\n') c = ';';
            out += "ERROR(" + reason + ")";
        }
        out += '\n';
    }
    return out;
}

} // namespace hpser
