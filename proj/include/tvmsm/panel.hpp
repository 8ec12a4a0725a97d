#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tvmsm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ExposureMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class OutcomeKind { continuous, count };

const char* to_string(OutcomeKind kind) noexcept;

// Candidate panel as delivered by a loader or generator; nothing is checked
// yet. All arrays are unit-major. Time-varying covariates are laid out as
// [unit][time][covariate].
struct RawPanel {
  std::size_t n = 0;
  std::size_t periods = 0;
  std::size_t baseline_dim = 0;
  std::size_t covariate_dim = 0;
  std::vector<std::string> ids;  // empty means "1".."n"
  std::vector<double> baseline;
  std::vector<double> timevarying;
  std::vector<double> exposure;
  std::vector<double> outcome;
  std::optional<std::vector<double>> offset;
  OutcomeKind kind = OutcomeKind::continuous;
};

struct ExposurePattern {
  std::vector<std::uint8_t> bits;
  int sum = 0;

  auto operator<=>(const ExposurePattern&) const = default;
};

struct PatternCount {
  ExposurePattern pattern;
  std::size_t units = 0;
};

/// Validated longitudinal panel of n units observed at D time points.
///
/// Immutable once constructed. Time indices are zero-based throughout the
/// library: time t here is period t+1 of the study.
class PanelDataset {
 public:
  std::size_t n() const noexcept { return static_cast<std::size_t>(exposure_.rows()); }
  std::size_t periods() const noexcept { return static_cast<std::size_t>(exposure_.cols()); }
  std::size_t baseline_dim() const noexcept { return static_cast<std::size_t>(baseline_.cols()); }
  std::size_t covariate_dim() const noexcept { return covariate_dim_; }
  OutcomeKind outcome_kind() const noexcept { return kind_; }
  bool has_offset() const noexcept { return offset_.has_value(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const RowMatrix& baseline() const noexcept { return baseline_; }
  // n × (D·pX); column t·pX + r holds covariate r at time t.
  const RowMatrix& timevarying() const noexcept { return timevarying_; }
  const ExposureMatrix& exposure() const noexcept { return exposure_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const std::optional<Eigen::VectorXd>& offset() const noexcept { return offset_; }
  // Cumulative exposure ΣT per unit.
  const Eigen::VectorXd& exposure_total() const noexcept { return exposure_total_; }

  double covariate(std::size_t unit, std::size_t t, std::size_t r) const {
    return timevarying_(static_cast<Eigen::Index>(unit),
                        static_cast<Eigen::Index>(t * covariate_dim_ + r));
  }
  int exposed(std::size_t unit, std::size_t t) const {
    return exposure_(static_cast<Eigen::Index>(unit), static_cast<Eigen::Index>(t));
  }

  ExposurePattern pattern(std::size_t unit) const;

  // Row gather; rows may repeat (bootstrap resamples).
  PanelDataset gather(std::span<const std::size_t> rows) const;

  RawPanel to_raw() const;

  friend PanelDataset validate(RawPanel raw);

 private:
  PanelDataset() = default;

  std::vector<std::string> ids_;
  RowMatrix baseline_;
  RowMatrix timevarying_;
  std::size_t covariate_dim_ = 0;
  ExposureMatrix exposure_;
  Eigen::VectorXd outcome_;
  std::optional<Eigen::VectorXd> offset_;
  Eigen::VectorXd exposure_total_;
  OutcomeKind kind_ = OutcomeKind::continuous;
};

// Throws Error(invalid_data) naming the first violated invariant.
PanelDataset validate(RawPanel raw);

// One row per distinct exposure pattern, lexicographic order.
std::vector<PatternCount> pattern_census(const PanelDataset& ds);

// ---- wide CSV ----

struct PanelSchema {
  std::size_t baseline_dim = 0;
  std::size_t covariate_dim = 0;
  std::size_t periods = 0;
  bool has_offset = false;

  bool operator==(const PanelSchema&) const = default;
};

std::vector<std::string> csv_header(const PanelSchema& schema);
PanelSchema schema_from_header(const std::vector<std::string>& header);

// Reads the wide layout: id, w_1..w_pW, then per time d: x_<d>_1..x_<d>_pX,
// t_<d>, then y and an optional offset. When `declared` is given it must
// match the header. The outcome kind defaults to count when an offset column
// is present, continuous otherwise.
PanelDataset read_panel_csv(std::istream& in, std::optional<PanelSchema> declared = {},
                            std::optional<OutcomeKind> kind = {});
PanelDataset read_panel_csv(const std::string& path, std::optional<PanelSchema> declared = {},
                            std::optional<OutcomeKind> kind = {});

// Shortest round-trip formatting, so write → read reproduces every double.
void write_panel_csv(std::ostream& out, const PanelDataset& ds);
void write_panel_csv(const std::string& path, const PanelDataset& ds);

std::string format_double(double value);

}  // namespace tvmsm
