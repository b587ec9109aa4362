#pragma once

#include <span>
#include <vector>

#include "dearfed/autodiff.hpp"
#include "dearfed/model_params.hpp"
#include "dearfed/nn.hpp"
#include "dearfed/rng.hpp"

namespace dearfed {

struct QeenConfig {
  std::size_t e_dim = 64;
  std::size_t enc_hidden = 256;
  std::size_t qe_hidden = 64;
  double lambda1 = 0.5;  // reconstruction loss weight
  double lambda2 = 0.5;  // quality-mark loss weight
  double lr = 1e-3;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double clip_norm = 5.0;
};

/// A model and its ground-truth defect mark.
struct MarkedModel {
  std::vector<double> w;
  double mark = 0.0;
  bool defective = false;  // a defect was injected (for evaluation only)
};

struct QualityReport {
  std::vector<double> embedding;
  double mark = 0.0;        // predicted n-hat in [0, 1]
  double normalized = 0.0;  // n-bar
};

/// Auto-encoder over flat forecaster parameters with a quality head.
///
/// Inputs are standardized per coordinate with statistics fitted on the
/// training corpus. The encoder is two FC layers d -> enc_hidden -> e_dim;
/// the decoder has one linear head per forecaster layer (e_dim -> layer size)
/// whose outputs are concatenated in layout order; the quality head is
/// e_dim -> qe_hidden -> 1 followed by a logistic.
class QeenModel {
 public:
  QeenModel(std::vector<LayoutEntry> layout, const QeenConfig& cfg, Rng& rng);

  std::size_t dim() const { return in_mean_.size(); }
  std::size_t e_dim() const { return cfg_.e_dim; }
  std::size_t heads() const { return decoder_.size(); }
  const QeenConfig& config() const { return cfg_; }
  const std::vector<LayoutEntry>& layout() const { return layout_; }

  void fit_input_stats(const std::vector<MarkedModel>& corpus);

  std::vector<double> encode(std::span<const double> w);
  /// Reconstructed parameters (length d, original units).
  std::vector<double> decode(std::span<const double> e);
  /// Predicted defect mark in [0, 1].
  double quality(std::span<const double> e);
  QualityReport report(std::span<const double> w);

  /// Batched graph pieces (rows are models / embeddings).
  Tensor standardize(const std::vector<const std::vector<double>*>& ws) const;
  Var encode(Graph& g, Var x_std);
  Var decode(Graph& g, Var e);    // standardized space
  Var quality(Graph& g, Var e);   // after logistic

  ParamList encoder_params();
  ParamList decoder_params();
  ParamList quality_params();
  ParamList params();

  /// Serialized with a "qeen/" prefix; includes the input statistics.
  ModelParams to_params() const;
  void from_params(const ModelParams& p);

 private:
  std::vector<LayoutEntry> layout_;
  QeenConfig cfg_;
  std::vector<double> in_mean_;
  std::vector<double> in_scale_;
  Mlp encoder_;
  std::vector<Linear> decoder_;
  Mlp quality_;
};

struct QeenEpoch {
  double joint = 0.0;
  double recon = 0.0;
  double mark = 0.0;
};

/// Joint minibatch training on lambda1 * recon MSE + lambda2 * mark MSE.
/// The quality head is frozen when lambda2 == 0. Fits input statistics
/// first unless keep_stats is set.
std::vector<QeenEpoch> train_qeen(QeenModel& qeen, const std::vector<MarkedModel>& corpus, Rng& rng,
                                  bool keep_stats = false);

/// Mean losses on a corpus without updating.
QeenEpoch evaluate_qeen(QeenModel& qeen, const std::vector<MarkedModel>& corpus);

/// Goodness 1 - n-hat normalized onto the simplex; uniform if all goodness is 0.
std::vector<double> normalize_marks(std::span<const double> marks);

/// Area under the ROC curve of scores for positives (label true) vs negatives.
/// Ties count one half.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

}  // namespace dearfed
