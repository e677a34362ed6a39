#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgif/encoder.hpp"
#include "dgif/tensor.hpp"

namespace dgif {

enum class Task { intent, slot };

/// Optional fragment replacements applied during verbalization, e.g.
/// "PER" -> "person". Keys are matched case-insensitively; a replacement may
/// be several words.
class VerbalizerOverrides {
 public:
  /// Parses lines of the form "raw_fragment<TAB>replacement". Blank lines and
  /// lines starting with '#' are skipped.
  static VerbalizerOverrides parse(const std::string& text);
  static VerbalizerOverrides load_file(const std::string& path);

  void set(const std::string& fragment, const std::string& replacement);
  /// Replacement words for a fragment, or the (lowercased) fragment itself.
  std::vector<std::string> expand(const std::string& fragment) const;
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> table_;
};

/// Turns a label name into natural-language words. Intent names split on
/// [._-]; slot tags first expand the BIO prefix (B- drops the prefix and
/// keeps the bare category, I- -> "inside", bare O -> "outside") and then
/// split the remainder the same way.
/// Total: any non-empty input yields at least one word.
std::vector<std::string> verbalize(const std::string& label, Task task,
                                   const VerbalizerOverrides& overrides);

/// An ordered label inventory for one task plus the verbalized form of each
/// name. Construction validates uniqueness and non-emptiness.
struct LabelSet {
  Task task = Task::intent;
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> verbalized;

  static LabelSet build(Task task, std::span<const std::string> names,
                        const VerbalizerOverrides& overrides);
  std::size_t size() const { return names.size(); }
  std::size_t index_of(const std::string& name) const;  // throws on miss
};

/// Embedded label inventory: basis row i is the pooled encoding of label i,
/// gram is basis . basis^T. Immutable once built; rebuild after any label
/// encoder update.
struct LabelSpace {
  Task task = Task::intent;
  Tensor basis;  // |labels| x d
  Tensor gram;   // |labels| x |labels|
  double ridge = 0.0;

  std::size_t size() const { return basis.rows(); }
  std::size_t dim() const { return basis.cols(); }
};

/// Assembles a LabelSpace from an explicit basis matrix (gram computed on the
/// tape so gradients reach the basis).
LabelSpace make_label_space(Tape& tape, Task task, const Tensor& basis, double ridge);

/// Encodes and pools every verbalized label with the label encoder.
LabelSpace embed_labels(Tape& tape, const LabelSet& set, const EncoderConfig& cfg,
                        const EncoderParams& params, const Vocab& vocab, double ridge);

/// Best approximation of x by a combination of the basis rows:
/// coords solves (gram + ridge.I) w = basis . x, projected = basis^T . w.
struct Projection {
  Tensor input;      // [d]
  Tensor coords;     // [|labels|]
  Tensor projected;  // [d]
};

Projection inject(Tape& tape, const Tensor& x, const LabelSpace& space);

/// Row-wise injection of a k x d matrix (used for token states).
struct RowProjection {
  Tensor coords;     // k x |labels|
  Tensor projected;  // k x d
};

RowProjection inject_rows(Tape& tape, const Tensor& x, const LabelSpace& space);

/// 1 + mean cosine similarity between each gold label embedding and every
/// label embedding. With exclude_self the i==j pairs are dropped from the
/// average. Throws DegenerateError on a zero-norm label embedding.
Tensor l_inter(Tape& tape, const LabelSpace& space, std::span<const std::size_t> gold,
               bool exclude_self = false);

/// Mean squared Euclidean distance between every sample/gold pair.
Tensor l_intra(Tape& tape, std::span<const Tensor> samples,
               std::span<const Tensor> gold_reps);

/// l_inter + lambda * l_intra.
Tensor l_re(Tape& tape, const LabelSpace& space, std::span<const std::size_t> gold_ids,
            std::span<const Tensor> samples, std::span<const Tensor> gold_reps,
            double lambda, bool exclude_self = false);

}  // namespace dgif
