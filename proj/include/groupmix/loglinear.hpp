#pragma once

#include <span>
#include <vector>

namespace groupmix {

using WeightVector = std::vector<double>;

/// One behavior option within a stimulus: a non-negative label plus its
/// feature vector.
struct Candidate {
  int id = 0;
  std::vector<double> features;
};

/// A finite choice situation: at least two candidates over a shared
/// feature space. Invariants (>= 2 candidates, equal feature dimensions,
/// distinct non-negative ids) are enforced at construction.
class Stimulus {
 public:
  explicit Stimulus(std::vector<Candidate> candidates);

  const std::vector<Candidate>& candidates() const noexcept {
    return candidates_;
  }
  std::size_t size() const noexcept { return candidates_.size(); }
  std::size_t feature_dim() const noexcept {
    return candidates_.front().features.size();
  }

  /// Position of the candidate with the given id, or -1 if absent.
  int index_of(int id) const noexcept;

 private:
  std::vector<Candidate> candidates_;
};

// Candidate ids produced by the binary attribute encoding. The positive
// candidate ("attribute used") is listed first and carries id 1.
inline constexpr int kAttributeUsed = 1;
inline constexpr int kAttributeUnused = 0;

/// log P(candidate | stimulus; w) for every candidate, in candidate order.
/// Scores are max-shifted before exponentiation, so finite inputs never
/// produce NaN or infinities and exp of the result sums to 1.
std::vector<double> log_distribution(const Stimulus& s, const WeightVector& w);

/// Allocation-free variant; out must have s.size() elements.
void log_distribution_into(const Stimulus& s, const WeightVector& w,
                           std::span<double> out);

/// Id of the most probable candidate. Ties go to the candidate listed
/// earliest in the stimulus.
int predict(const Stimulus& s, std::span<const double> dist);

/// Gradient of log P(observed | s; w) with respect to w:
/// features(observed) minus the model expectation of the features.
std::vector<double> grad_log_prob(const Stimulus& s, int observed,
                                  const WeightVector& w);

struct BinaryEncoding {
  Stimulus stimulus;
  int observed;
};

/// Encodes a binary attribute decision as a two-candidate stimulus:
/// candidate 1 carries attr_features, candidate 0 their negation.
BinaryEncoding encode_binary(std::span<const double> attr_features,
                             bool use_attribute);

}  // namespace groupmix
