#pragma once

// Stage one: a single gradient step for the second layer from a(0) = 0 with
// tau_l = N(d, l), then a single step for the channel weights, then the
// threshold rule tau_l = 1{tau_l(1) >= 2 eps0} sqrt(N(d, l)).

#include "sphattn/common.hpp"
#include "sphattn/kernel_engine.hpp"
#include "sphattn/target_synth.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sphattn {

struct SelectionResult {
  std::vector<double> tau_raw;
  std::vector<bool> mask;
  AttentionWeights tau_final;
  std::optional<int> ell_hat;  // empty when no channel passed the threshold
  double epsilon0 = 0.0;

  bool empty() const { return !ell_hat.has_value(); }
  /// True when the selected degrees are exactly 0..ell_hat.
  bool contiguous() const;
};

/// H(r, l) = sum_i y_i P_l(<x_i, q_r>), streamed over row blocks of Q.
/// Both stage-one updates are linear in H.
Matrix channel_projections(const Matrix& s, const Vector& y, const FirstLayerDirections& q, int L);

/// a(1)_r = 1/(n sqrt(m)) sum_i [sum_l N(d,l) P_l(<q_r, x_i>)] y_i.
Vector stage1_a(const LabeledDataset& data, const FirstLayerDirections& q, int L);

/// tau_l(1) = 1/(n sqrt(m)) sum_{i,r} y_i N(d,l) P_l(<x_i, q_r>) a1_r.
std::vector<double> stage1_tau(const LabeledDataset& data, const FirstLayerDirections& q, const Vector& a1,
                               int L);

SelectionResult threshold(const std::vector<double>& tau_raw, double epsilon0, int d);

SelectionResult select_channels(const LabeledDataset& data, const FirstLayerDirections& q, int L,
                                double epsilon0);

/// {"tau_raw": [...], "mask": [...], "ell_hat": int|null, "epsilon0": x}
std::string selection_to_json(const SelectionResult& result);
SelectionResult selection_from_json(const std::string& text, int d);

}  // namespace sphattn
