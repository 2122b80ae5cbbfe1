#include "tidal/csvio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tidal/error.hpp"

namespace tidal {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || text.empty()) {
    fail(ErrorCode::ParseError, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  // (line number, cells)
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    cells.emplace_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  const std::string text = read_text_file(path);
  CsvTable table;
  table.source = path.string();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      if (cells != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        fail(ErrorCode::ParseError,
             table.source + ":" + std::to_string(line_no) + ": expected header '" + want + "'");
      }
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != expected.size()) {
      fail(ErrorCode::ParseError, table.source + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(expected.size()) + " fields, found " +
                                      std::to_string(cells.size()));
    }
    table.rows.emplace_back(line_no, std::move(cells));
  }
  if (!have_header) fail(ErrorCode::ParseError, table.source + ": empty file");
  return table;
}

double cell_number(const CsvTable& t, std::size_t line, const std::string& cell) {
  try {
    const double v = parse_double(cell);
    if (!std::isfinite(v)) fail(ErrorCode::ParseError, "non-finite value");
    return v;
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, t.source + ":" + std::to_string(line) + ": " + e.what());
  }
}

std::optional<double> optional_number(const CsvTable& t, std::size_t line,
                                      const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return cell_number(t, line, cell);
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

RespiratorySignal read_signal_csv(const std::filesystem::path& path, std::string subject_id) {
  const auto table = read_csv(path, {"time_s", "force_n"});
  if (table.rows.size() < 2) {
    fail(ErrorCode::ParseError, table.source + ": a signal needs at least 2 rows");
  }
  std::vector<double> times, forces;
  times.reserve(table.rows.size());
  forces.reserve(table.rows.size());
  for (const auto& [line, cells] : table.rows) {
    const double t = cell_number(table, line, cells[0]);
    if (!times.empty() && !(t > times.back())) {
      fail(ErrorCode::ParseError,
           table.source + ":" + std::to_string(line) + ": time_s must be strictly increasing");
    }
    times.push_back(t);
    forces.push_back(cell_number(table, line, cells[1]));
  }
  std::vector<double> dt(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) dt[i] = times[i + 1] - times[i];
  std::vector<double> sorted = dt;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double lower =
        *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2));
    median = 0.5 * (median + lower);
  }
  for (std::size_t i = 0; i < dt.size(); ++i) {
    if (std::abs(dt[i] - median) > 1e-3 * median) {
      fail(ErrorCode::InvalidInput, table.source + ":" + std::to_string(table.rows[i + 1].first) +
                                        ": non-uniform sample spacing");
    }
  }
  return RespiratorySignal(std::move(forces), 1.0 / median, std::move(subject_id));
}

std::string signal_csv(const RespiratorySignal& signal) {
  std::string out = "time_s,force_n\n";
  const auto s = signal.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(static_cast<double>(i) / signal.sample_rate_hz());
    out += ',';
    out += format_double(s[i]);
    out += '\n';
  }
  return out;
}

namespace {

const std::vector<std::string> kSubjectHeader{"subject_id", "age_y",   "height_cm",
                                              "weight_kg",  "bmi",     "fev1_l",
                                              "fvc_l",      "fev1_fvc", "fev1_pct_pred"};
const std::vector<std::string> kFeatureHeader{"subject_id", "fit",      "rr",
                                              "tv",         "n_cycles", "quality_score"};

}  // namespace

std::vector<SubjectRecord> read_subjects_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, kSubjectHeader);
  std::vector<SubjectRecord> out;
  std::set<std::string> seen;
  for (const auto& [line, c] : table.rows) {
    const std::string where = table.source + ":" + std::to_string(line) + ": ";
    if (c[0].empty()) fail(ErrorCode::ParseError, where + "empty subject_id");
    if (!seen.insert(c[0]).second) {
      fail(ErrorCode::ParseError, where + "duplicate subject_id '" + c[0] + "'");
    }
    SubjectRecord r;
    r.subject_id = c[0];
    r.age_y = optional_number(table, line, c[1]);
    r.height_cm = optional_number(table, line, c[2]);
    r.weight_kg = optional_number(table, line, c[3]);
    r.bmi = optional_number(table, line, c[4]);
    r.fev1_l = optional_number(table, line, c[5]);
    r.fvc_l = optional_number(table, line, c[6]);
    r.fev1_fvc = optional_number(table, line, c[7]);
    r.fev1_pct_pred = optional_number(table, line, c[8]);
    try {
      r.validate();
    } catch (const Error& e) {
      fail(ErrorCode::InvalidInput, where + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string subjects_csv(const std::vector<SubjectRecord>& subjects) {
  std::string out;
  for (std::size_t i = 0; i < kSubjectHeader.size(); ++i) {
    out += (i ? "," : "") + kSubjectHeader[i];
  }
  out += '\n';
  for (const auto& r : subjects) {
    out += r.subject_id;
    for (const auto* v : {&r.age_y, &r.height_cm, &r.weight_kg, &r.bmi, &r.fev1_l, &r.fvc_l,
                          &r.fev1_fvc, &r.fev1_pct_pred}) {
      out += ',';
      out += optional_cell(*v);
    }
    out += '\n';
  }
  return out;
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, kFeatureHeader);
  std::vector<FeatureRow> out;
  std::set<std::string> seen;
  for (const auto& [line, c] : table.rows) {
    const std::string where = table.source + ":" + std::to_string(line) + ": ";
    if (c[0].empty()) fail(ErrorCode::ParseError, where + "empty subject_id");
    if (!seen.insert(c[0]).second) {
      fail(ErrorCode::ParseError, where + "duplicate subject_id '" + c[0] + "'");
    }
    FeatureRow row;
    row.subject_id = c[0];
    row.features.fit = cell_number(table, line, c[1]);
    row.features.rr = cell_number(table, line, c[2]);
    row.features.tv = cell_number(table, line, c[3]);
    const double n = cell_number(table, line, c[4]);
    if (!(n >= 0.0) || n != std::floor(n)) {
      fail(ErrorCode::ParseError, where + "n_cycles must be a non-negative integer");
    }
    row.features.n_cycles = static_cast<std::size_t>(n);
    row.quality_score = cell_number(table, line, c[5]);
    out.push_back(std::move(row));
  }
  return out;
}

std::string features_csv(const std::vector<FeatureRow>& rows) {
  std::string out = "subject_id,fit,rr,tv,n_cycles,quality_score\n";
  for (const auto& r : rows) {
    out += r.subject_id + ',' + format_double(r.features.fit) + ',' +
           format_double(r.features.rr) + ',' + format_double(r.features.tv) + ',' +
           std::to_string(r.features.n_cycles) + ',' + format_double(r.quality_score) + '\n';
  }
  return out;
}

}  // namespace tidal
