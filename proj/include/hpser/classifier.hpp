#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpser/errors.hpp"
#include "hpser/featuremap.hpp"
#include "hpser/rng.hpp"

namespace hpser {

inline constexpr size_t kEmbeddingDim = 2048;
inline constexpr size_t kPoolGrid = 32;

using EmbeddingVector = std::vector<double>; // always kEmbeddingDim values

struct LabeledEmbedding {
    EmbeddingVector values;
    EmotionLabel label;
};

// Deterministic stand-in for a learned feature extractor: each channel is
// average-pooled onto a 32x32 grid (pooling windows split each axis as evenly
// as possible) and the two grids are flattened channel-major into a
// 2048-dimensional vector.
EmbeddingVector pool_embed(const FeatureMap& map);

// Embedding exchange file (little-endian): magic "EMB2", version u16,
// dimension u32 (= 2048), count u32, then per record a label byte and
// `dimension` float32 values, closed by a CRC-32 of all preceding bytes.
std::vector<uint8_t> encode_embeddings(std::span<const LabeledEmbedding> records);
std::vector<LabeledEmbedding> decode_embeddings(std::span<const uint8_t> bytes);
void export_embeddings(std::span<const LabeledEmbedding> records, const std::string& path);
std::vector<LabeledEmbedding> import_embeddings(const std::string& path);

enum class Activation : uint8_t { relu = 0, identity = 1 };
enum class RunMode { train, eval };

struct AdamState {
    uint64_t step = 0;
    std::vector<std::vector<double>> m_w, v_w; // per layer, same shapes as weights
    std::vector<std::vector<double>> m_b, v_b;
};

// Fully connected classifier. weights[l] maps layer_sizes[l] inputs to
// layer_sizes[l+1] outputs (row-major, one row per output unit). Dropout
// rates apply to the hidden activations, one rate per hidden layer, and are
// active only in training mode (inverted dropout: survivors are scaled by
// 1 / (1 - rate)). The output layer is always softmax.
struct MlpModel {
    std::vector<size_t> layer_sizes;
    std::vector<double> dropout_rates;
    Activation activation = Activation::relu;
    uint64_t seed = 0;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    AdamState adam;

    size_t num_weight_layers() const { return weights.size(); }
    size_t input_dim() const { return layer_sizes.front(); }
    size_t output_dim() const { return layer_sizes.back(); }
};

// Uniform fan-in (Kaiming-style) initialization, biases zero.
MlpModel make_mlp(std::vector<size_t> layer_sizes, std::vector<double> dropout_rates,
                  uint64_t seed, Activation activation = Activation::relu);

// The emotion classifier: 2048 -> 1024 -> 1024 -> 512 -> 512 -> 7 with
// dropout 0.5, 0.5, 0.3, 0.3 on the hidden layers.
MlpModel make_emotion_mlp(uint64_t seed);

// Class probabilities for one input. Train mode draws dropout masks from
// `rng`; eval mode is a pure function of (weights, input). Softmax subtracts
// the max logit, so probabilities are finite and strictly positive.
std::vector<double> forward(const MlpModel& model, std::span<const double> x, RunMode mode,
                            Rng* rng);
std::vector<double> forward(const MlpModel& model, std::span<const double> x);

// Mean cross-entropy of the batch under eval-mode forward passes.
double batch_loss(const MlpModel& model, std::span<const LabeledEmbedding> batch);

struct TrainConfig {
    double learning_rate = 1e-4;
    size_t batch_size = 128;
    size_t epochs = 128;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    uint64_t seed = 0;
};

struct EvalReport {
    double overall_accuracy = 0.0;
    std::array<double, kNumEmotions> per_class_accuracy{};
    // Row-normalized percentages; rows with zero samples stay all-zero.
    std::array<std::array<double, kNumEmotions>, kNumEmotions> confusion{};
    std::array<size_t, kNumEmotions> class_counts{};
    size_t total = 0;
};

// Argmax prediction (ties break toward the lowest class ordinal).
EmotionLabel predict(const MlpModel& model, std::span<const double> x);
EvalReport evaluate(const MlpModel& model, std::span<const LabeledEmbedding> test_set);

// Confusion matrix as CSV (header row plus one row per emotion, cells in
// percent with two decimals) and the full report as JSON. Both use '.' as the
// decimal separator regardless of locale.
std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

struct FitConfig {
    double learning_rate = 1e-4;
    size_t batch_size = 128;
    size_t epochs = 128;
    // Evaluate the (dropout-disabled) training loss after every epoch.
    bool track_train_loss = false;
    // Stop as soon as training accuracy reaches 1 (checked per epoch).
    bool stop_at_full_train_accuracy = false;
};

struct FitTrace {
    std::vector<double> train_loss;   // per epoch, when tracked
    std::vector<double> val_accuracy; // per epoch, when a validation set is given
    size_t best_epoch = 0;            // earliest epoch with the best val accuracy
    size_t epochs_run = 0;
};

// Mini-batch cross-entropy training with Adam (beta1 0.9, beta2 0.999,
// eps 1e-8). Shuffling, dropout and everything else draw from `rng`, so a
// fixed seed reproduces the run bit-exactly. When `best` is non-null it
// receives the model snapshot with the highest validation accuracy (earliest
// epoch on ties).
FitTrace fit(MlpModel& model, std::span<const LabeledEmbedding> train_set,
             std::span<const LabeledEmbedding> val_set, const FitConfig& cfg, Rng& rng,
             MlpModel* best = nullptr);

struct SplitIndices {
    std::vector<size_t> train, val, test;
};

// Seeded shuffle followed by a per-class largest-remainder allocation, so
// every class is represented in proportion across the three partitions.
// Throws EmptyPartition when a fraction rounds a whole partition to zero.
SplitIndices stratified_split(std::span<const EmotionLabel> labels, double train_fraction,
                              double val_fraction, double test_fraction, Rng& rng);

struct TrainResult {
    MlpModel model;
    EvalReport report;
    double best_val_accuracy = 0.0;
    size_t best_epoch = 0;
};

// End-to-end protocol: seeded shuffle, stratified split, oversampling of the
// training partition only, Adam training, then evaluation of the best
// validation snapshot on the test partition. Deterministic per seed.
TrainResult train(std::span<const LabeledEmbedding> dataset, const TrainConfig& cfg,
                  std::span<const EmotionLabel> required_classes = {});

struct GradCheckOptions {
    double step = 1e-5;
    size_t samples_per_group = 24; // parameters probed per weight/bias group
    uint64_t seed = 7;
    // Test hook: flips the sign of the analytic gradients of one weight
    // layer so the harness can prove it detects broken gradients.
    int flip_sign_of_layer = -1;
};

// Compares analytic gradients against central finite differences with
// dropout disabled, probing a deterministic sample of parameters in every
// weight and bias group. Returns the maximum guarded relative error
// |ga - gn| / max(|ga| + |gn|, 1e-4).
double gradient_check(const MlpModel& model, std::span<const LabeledEmbedding> batch,
                      const GradCheckOptions& options = {});

// Checkpoint (little-endian): magic "MLPC", version u16, activation u8,
// layer count u32 + sizes, dropout rates f64, weights/biases f64, Adam state
// (step, first and second moments), seed, CRC-32.
std::vector<uint8_t> encode_model(const MlpModel& model);
MlpModel decode_model(std::span<const uint8_t> bytes);
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

} // namespace hpser
