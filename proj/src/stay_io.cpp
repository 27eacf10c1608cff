#include "dsa/stay_io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace dsa {

namespace {

void split_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& field, const std::string& context) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error("bad numeric field '" + field + "' in " + context);
  }
  return value;
}

long parse_long(const std::string& field, const std::string& context) {
  long value = 0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error("bad integer field '" + field + "' in " + context);
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_stays_csv(const std::string& path, const std::vector<Stay>& stays) {
  if (stays.empty()) throw std::invalid_argument("no stays to write");
  const Eigen::Index d = stays.front().features.cols();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "stay_id,step";
  for (Eigen::Index j = 0; j < d; ++j) out << ",feat_" << j;
  out << ",event\n";
  for (const Stay& stay : stays) {
    validate_stay(stay);
    if (stay.features.cols() != d) {
      throw std::invalid_argument("stay " + stay.id + " has inconsistent feature count");
    }
    for (Eigen::Index t = 0; t < stay.features.rows(); ++t) {
      out << stay.id << ',' << t;
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(stay.features(t, j));
      out << ',' << int(stay.events[static_cast<std::size_t>(t)]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<Stay> read_stays_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> fields;
  split_line(line, fields);
  if (fields.size() < 3 || fields[0] != "stay_id" || fields[1] != "step" ||
      fields.back() != "event") {
    throw std::runtime_error(path + ": expected header stay_id,step,feat_*,event");
  }
  const std::size_t d = fields.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    if (fields[2 + j] != "feat_" + std::to_string(j)) {
      throw std::runtime_error(path + ": expected column feat_" + std::to_string(j));
    }
  }

  std::vector<Stay> stays;
  std::vector<std::vector<double>> rows;   // features of the stay being read
  std::vector<std::uint8_t> events;
  std::string current_id;
  long expected_step = 0;
  std::size_t line_no = 1;

  auto flush = [&]() {
    if (current_id.empty()) return;
    Stay stay;
    stay.id = current_id;
    stay.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        stay.features(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
      }
    }
    stay.events = events;
    validate_stay(stay);
    stays.push_back(std::move(stay));
    rows.clear();
    events.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    split_line(line, fields);
    const std::string context = path + ":" + std::to_string(line_no);
    if (fields.size() != d + 3) {
      throw std::runtime_error(context + ": expected " + std::to_string(d + 3) + " fields, got " +
                               std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw std::runtime_error(context + ": empty stay_id");
    if (fields[0] != current_id) {
      for (const Stay& prev : stays) {
        if (prev.id == fields[0]) {
          throw std::runtime_error(context + ": rows for stay " + fields[0] + " are not contiguous");
        }
      }
      flush();
      current_id = fields[0];
      expected_step = 0;
    }
    const long step = parse_long(fields[1], context);
    if (step != expected_step) {
      throw std::runtime_error(context + ": stay " + current_id + " expected step " +
                               std::to_string(expected_step) + ", got " + std::to_string(step));
    }
    ++expected_step;
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(fields[2 + j], context);
    const long ev = parse_long(fields[d + 2], context);
    if (ev != 0 && ev != 1) throw std::runtime_error(context + ": event must be 0 or 1");
    rows.push_back(std::move(row));
    events.push_back(static_cast<std::uint8_t>(ev));
  }
  flush();
  if (stays.empty()) throw std::runtime_error(path + ": no data rows");
  return stays;
}

void write_ground_truth_csv(const std::string& path, const std::vector<Stay>& stays,
                            const std::vector<std::vector<double>>& onset_prob) {
  if (stays.size() != onset_prob.size()) {
    throw std::invalid_argument("ground truth size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "stay_id,step,onset_prob\n";
  for (std::size_t i = 0; i < stays.size(); ++i) {
    const Stay& stay = stays[i];
    if (onset_prob[i].size() != stay.events.size()) {
      throw std::invalid_argument("ground truth length mismatch for stay " + stay.id);
    }
    for (std::size_t t = 0; t < onset_prob[i].size(); ++t) {
      out << stay.id << ',' << t << ',' << format_double(onset_prob[i][t]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace dsa
