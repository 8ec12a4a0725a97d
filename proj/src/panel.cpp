#include "tvmsm/panel.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tvmsm/error.hpp"

namespace tvmsm {

namespace {

const char* kModule = "panel";

[[noreturn]] void invalid(const std::string& message) {
  throw Error(Errc::invalid_data, kModule, message);
}

void require_size(const char* field, std::size_t actual, std::size_t expected) {
  if (actual != expected) {
    invalid(std::string("dimension mismatch: ") + field + " has " + std::to_string(actual) +
            " entries, expected " + std::to_string(expected));
  }
}

void require_finite(const char* field, const std::vector<double>& values, std::size_t stride) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      invalid(std::string("missing or non-finite value in ") + field + " at unit " +
              std::to_string(k / stride + 1));
    }
  }
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      field.push_back(c);
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

double parse_number(const std::string& text) {
  double value = std::nan("");
  if (text.empty()) return value;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nan("");
  return value;
}

}  // namespace

const char* to_string(OutcomeKind kind) noexcept {
  return kind == OutcomeKind::count ? "count" : "continuous";
}

PanelDataset validate(RawPanel raw) {
  const std::size_t n = raw.n;
  const std::size_t periods = raw.periods;
  if (n < 1) invalid("panel must contain at least one unit");
  if (periods < 1) invalid("panel must contain at least one time point");

  require_size("baseline", raw.baseline.size(), n * raw.baseline_dim);
  require_size("timevarying", raw.timevarying.size(), n * periods * raw.covariate_dim);
  require_size("exposure", raw.exposure.size(), n * periods);
  require_size("outcome", raw.outcome.size(), n);
  if (raw.offset) require_size("offset", raw.offset->size(), n);
  if (!raw.ids.empty()) require_size("id", raw.ids.size(), n);

  require_finite("baseline", raw.baseline, std::max<std::size_t>(raw.baseline_dim, 1));
  require_finite("timevarying", raw.timevarying,
                 std::max<std::size_t>(periods * raw.covariate_dim, 1));
  require_finite("exposure", raw.exposure, periods);
  require_finite("outcome", raw.outcome, 1);
  if (raw.offset) require_finite("offset", *raw.offset, 1);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < periods; ++t) {
      double v = raw.exposure[i * periods + t];
      if (v != 0.0 && v != 1.0) {
        invalid("non-binary exposure at (unit " + std::to_string(i + 1) + ", time " +
                std::to_string(t + 1) + ")");
      }
    }
  }
  if (raw.offset) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!((*raw.offset)[i] > 0.0)) invalid("non-positive offset at unit " + std::to_string(i + 1));
    }
  }
  if (raw.kind == OutcomeKind::count) {
    for (std::size_t i = 0; i < n; ++i) {
      if (raw.outcome[i] < 0.0) invalid("negative count outcome at unit " + std::to_string(i + 1));
    }
  }

  PanelDataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.kind_ = raw.kind;
  ds.covariate_dim_ = raw.covariate_dim;
  if (raw.ids.empty()) {
    ds.ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.ids_.push_back(std::to_string(i + 1));
  } else {
    ds.ids_ = std::move(raw.ids);
  }
  ds.baseline_ = Eigen::Map<const RowMatrix>(raw.baseline.data(), rows,
                                             static_cast<Eigen::Index>(raw.baseline_dim));
  ds.timevarying_ = Eigen::Map<const RowMatrix>(
      raw.timevarying.data(), rows, static_cast<Eigen::Index>(periods * raw.covariate_dim));
  ds.exposure_ = Eigen::Map<const RowMatrix>(raw.exposure.data(), rows,
                                             static_cast<Eigen::Index>(periods))
                     .cast<std::uint8_t>();
  ds.outcome_ = Eigen::Map<const Eigen::VectorXd>(raw.outcome.data(), rows);
  if (raw.offset) ds.offset_ = Eigen::Map<const Eigen::VectorXd>(raw.offset->data(), rows);
  ds.exposure_total_ = ds.exposure_.cast<double>().rowwise().sum();
  return ds;
}

ExposurePattern PanelDataset::pattern(std::size_t unit) const {
  ExposurePattern p;
  p.bits.resize(periods());
  for (std::size_t t = 0; t < periods(); ++t) {
    p.bits[t] = static_cast<std::uint8_t>(exposed(unit, t));
    p.sum += p.bits[t];
  }
  return p;
}

PanelDataset PanelDataset::gather(std::span<const std::size_t> rows) const {
  PanelDataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.kind_ = kind_;
  out.covariate_dim_ = covariate_dim_;
  out.ids_.reserve(rows.size());
  out.baseline_.resize(m, baseline_.cols());
  out.timevarying_.resize(m, timevarying_.cols());
  out.exposure_.resize(m, exposure_.cols());
  out.outcome_.resize(m);
  out.exposure_total_.resize(m);
  if (offset_) out.offset_ = Eigen::VectorXd(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    out.ids_.push_back(ids_[static_cast<std::size_t>(i)]);
    out.baseline_.row(k) = baseline_.row(i);
    out.timevarying_.row(k) = timevarying_.row(i);
    out.exposure_.row(k) = exposure_.row(i);
    out.outcome_(k) = outcome_(i);
    out.exposure_total_(k) = exposure_total_(i);
    if (offset_) (*out.offset_)(k) = (*offset_)(i);
  }
  return out;
}

RawPanel PanelDataset::to_raw() const {
  RawPanel raw;
  raw.n = n();
  raw.periods = periods();
  raw.baseline_dim = baseline_dim();
  raw.covariate_dim = covariate_dim();
  raw.kind = kind_;
  raw.ids = ids_;
  raw.baseline.assign(baseline_.data(), baseline_.data() + baseline_.size());
  raw.timevarying.assign(timevarying_.data(), timevarying_.data() + timevarying_.size());
  raw.exposure.resize(static_cast<std::size_t>(exposure_.size()));
  for (Eigen::Index k = 0; k < exposure_.size(); ++k) {
    raw.exposure[static_cast<std::size_t>(k)] = exposure_.data()[k];
  }
  raw.outcome.assign(outcome_.data(), outcome_.data() + outcome_.size());
  if (offset_) raw.offset = std::vector<double>(offset_->data(), offset_->data() + offset_->size());
  return raw;
}

std::vector<PatternCount> pattern_census(const PanelDataset& ds) {
  std::map<ExposurePattern, std::size_t> tally;
  for (std::size_t i = 0; i < ds.n(); ++i) ++tally[ds.pattern(i)];
  std::vector<PatternCount> rows;
  rows.reserve(tally.size());
  for (auto& [pattern, count] : tally) rows.push_back({pattern, count});
  return rows;
}

// ---- CSV ----

std::vector<std::string> csv_header(const PanelSchema& schema) {
  std::vector<std::string> h{"id"};
  for (std::size_t j = 1; j <= schema.baseline_dim; ++j) h.push_back("w_" + std::to_string(j));
  for (std::size_t d = 1; d <= schema.periods; ++d) {
    for (std::size_t r = 1; r <= schema.covariate_dim; ++r) {
      h.push_back("x_" + std::to_string(d) + "_" + std::to_string(r));
    }
    h.push_back("t_" + std::to_string(d));
  }
  h.push_back("y");
  if (schema.has_offset) h.push_back("offset");
  return h;
}

PanelSchema schema_from_header(const std::vector<std::string>& header) {
  PanelSchema s;
  s.has_offset = !header.empty() && header.back() == "offset";
  for (const auto& col : header) {
    if (col.rfind("w_", 0) == 0) ++s.baseline_dim;
    if (col.rfind("t_", 0) == 0) ++s.periods;
  }
  std::size_t xcols = 0;
  for (const auto& col : header) {
    if (col.rfind("x_", 0) == 0) ++xcols;
  }
  if (s.periods == 0) {
    throw Error(Errc::invalid_data, kModule, "header has no exposure columns t_<d>");
  }
  if (xcols % s.periods != 0) {
    throw Error(Errc::invalid_data, kModule,
                "header has " + std::to_string(xcols) + " time-varying columns for " +
                    std::to_string(s.periods) + " time points");
  }
  s.covariate_dim = xcols / s.periods;
  if (header != csv_header(s)) {
    throw Error(Errc::invalid_data, kModule, "header does not follow the wide panel layout");
  }
  return s;
}

PanelDataset read_panel_csv(std::istream& in, std::optional<PanelSchema> declared,
                            std::optional<OutcomeKind> kind) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::invalid_data, kModule, "missing CSV header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const PanelSchema schema = schema_from_header(header);
  if (declared) {
    PanelSchema want = *declared;
    want.has_offset = schema.has_offset;
    if (want != schema) {
      throw Error(Errc::invalid_data, kModule,
                  "declared dimensions (pW=" + std::to_string(declared->baseline_dim) +
                      ", pX=" + std::to_string(declared->covariate_dim) +
                      ", D=" + std::to_string(declared->periods) + ") do not match the CSV header");
    }
  }

  RawPanel raw;
  raw.periods = schema.periods;
  raw.baseline_dim = schema.baseline_dim;
  raw.covariate_dim = schema.covariate_dim;
  raw.kind = kind.value_or(schema.has_offset ? OutcomeKind::count : OutcomeKind::continuous);
  if (schema.has_offset) raw.offset.emplace();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::invalid_data, kModule,
                  "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    std::size_t c = 0;
    raw.ids.push_back(fields[c++]);
    for (std::size_t j = 0; j < schema.baseline_dim; ++j) raw.baseline.push_back(parse_number(fields[c++]));
    for (std::size_t d = 0; d < schema.periods; ++d) {
      for (std::size_t r = 0; r < schema.covariate_dim; ++r) {
        raw.timevarying.push_back(parse_number(fields[c++]));
      }
      raw.exposure.push_back(parse_number(fields[c++]));
    }
    raw.outcome.push_back(parse_number(fields[c++]));
    if (raw.offset) raw.offset->push_back(parse_number(fields[c++]));
    ++raw.n;
  }
  return validate(std::move(raw));
}

PanelDataset read_panel_csv(const std::string& path, std::optional<PanelSchema> declared,
                            std::optional<OutcomeKind> kind) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, kModule, "cannot open " + path);
  return read_panel_csv(in, declared, kind);
}

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_panel_csv(std::ostream& out, const PanelDataset& ds) {
  const PanelSchema schema{ds.baseline_dim(), ds.covariate_dim(), ds.periods(), ds.has_offset()};
  const auto header = csv_header(schema);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << ds.ids()[i];
    for (Eigen::Index j = 0; j < ds.baseline().cols(); ++j) out << ',' << format_double(ds.baseline()(row, j));
    for (std::size_t t = 0; t < ds.periods(); ++t) {
      for (std::size_t r = 0; r < ds.covariate_dim(); ++r) out << ',' << format_double(ds.covariate(i, t, r));
      out << ',' << ds.exposed(i, t);
    }
    out << ',' << format_double(ds.outcome()(row));
    if (ds.offset()) out << ',' << format_double((*ds.offset())(row));
    out << '\n';
  }
}

void write_panel_csv(const std::string& path, const PanelDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, kModule, "cannot write " + path);
  write_panel_csv(out, ds);
}

}  // namespace tvmsm
