#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lfo/meta.hpp"
#include "lfo/net.hpp"
#include "lfo/taskgen.hpp"

namespace lfo {

inline constexpr int kNoneLabel = -1;

struct Normalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
};

Normalization compute_normalization(const std::vector<LabeledVideo>& videos);

struct LocalizerSpec {
  NetSpec embed;           // flattened frame -> E
  int k = 2;               // head classes
  int snippet_length = 4;  // frames pooled per snippet

  NetSpec head() const;  // linear E -> k
  std::size_t param_count() const;
  void validate() const;
};

LocalizerSpec make_localizer(int image_size, int k, int snippet_length = 4,
                             int hidden = 64, int embed_dim = 32);

std::uint64_t localizer_hash(const LocalizerSpec& spec);

struct MetaModel {
  LocalizerSpec spec;
  ParamVector theta;
  double inner_alpha = 0.05;
  std::string trained_with;  // maml_exact | maml_first_order | reptile
  Normalization norm;
};

// Snippet classifier: per-frame embedding, mean pooling over the snippet,
// linear head. Batches hold one snippet per row (frames concatenated).
class SnippetObjective final : public MetaObjective {
 public:
  SnippetObjective(NetSpec embed, int k, int snippet_length);
  std::size_t param_count() const override;
  double loss_grad(const double* params, const Batch& data, double* grad) const override;
  void hvp(const double* params, const double* v, const Batch& data,
           double* hv) const override;
  double loss_only(const double* params, const Batch& data) const;

  const NetSpec& embed() const { return embed_; }
  const NetSpec& head() const { return head_; }
  std::size_t embed_count() const { return embed_.param_count(); }

 private:
  NetSpec embed_;
  NetSpec head_;
  int s_;
};

// Normalized snippet batch (all snippets of all videos, activity labels).
Batch snippet_batch(const LocalizerSpec& spec, const Normalization& norm,
                    const std::vector<const LabeledVideo*>& videos);

std::vector<double> snippet_logits(const LocalizerSpec& spec, const ParamVector& params,
                                   const Normalization& norm,
                                   const std::vector<Frame>& frames, int start);

ParamVector init_localizer_params(const LocalizerSpec& spec, std::uint64_t seed);

// Full-batch SGD at inner_alpha on the demo's snippets; one quantized
// parameter update per step.
ParamVector inner_finetune(const MetaModel& meta, const LabeledVideo& demo, int steps);

struct MetaTrainConfig {
  std::string mode = "maml_exact";  // maml_exact | maml_first_order | reptile
  double inner_alpha = 0.05;
  double meta_lr = -1.0;  // < 0 = per-mode default (3e-3 adam, 0.5 reptile)
  int iters = 300;
  int task_batch = 4;
  int reptile_inner_steps = 3;
  int snippet_length = 4;
  int embed_hidden = 64;
  int embed_dim = 32;
  std::uint64_t seed = 0;
  void validate() const;
};

MetaModel meta_train(const std::vector<LabeledVideo>& videos, int k,
                     const MetaTrainConfig& config);

struct LocalizationResult {
  std::vector<int> labels;    // [0,k) or kNoneLabel
  std::vector<double> probs;  // max softmax probability per snippet
};

// threshold < 0 disables none-of-the-above
LocalizationResult localize(const LocalizerSpec& spec, const ParamVector& theta_tau,
                            const Normalization& norm, const LabeledVideo& video,
                            double threshold);

struct BaselineConfig {
  double lr = 1e-3;
  int steps = 300;
  int batch = 32;
  int snippet_length = 4;
  int embed_hidden = 64;
  int embed_dim = 32;
  std::uint64_t seed = 0;
};

struct BaselineModel {
  LocalizerSpec spec;  // head width = distinct training colors
  ParamVector params;
  Normalization norm;
  std::vector<int> classes;  // sorted colors the head indexes
  double final_loss = 0.0;
};

// Color classifier over every training snippet; the pooled embedding is the
// feature layer for nearest-neighbor transfer.
BaselineModel baseline_train(const std::vector<LabeledVideo>& videos,
                             const std::vector<TaskSpec>& tasks,
                             const BaselineConfig& config);

std::vector<double> baseline_features(const BaselineModel& model,
                                      const LabeledVideo& video);  // snippets x E

LocalizationResult baseline_localize(const BaselineModel& model,
                                     const LabeledVideo& demo,
                                     const LabeledVideo& target);

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> per_class_iou;  // classes absent everywhere report 1
  double miou = 0.0;
};

Metrics localization_metrics(const std::vector<int>& gt, const std::vector<int>& pred,
                             int k);

}  // namespace lfo
