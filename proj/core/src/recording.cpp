#include "phasedet/recording.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <string_view>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"

namespace phasedet {

namespace {

constexpr std::string_view kHeader =
    "t,b01,b02,b03,b04,b05,b06,b07,b08,b09,b10,b11,b12,a01,a02,a03,a04,phase";
constexpr std::size_t kColumns = 1 + kNumBinary + kNumAnalog + 1;

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

long parse_long(std::string_view field, std::size_t line_no, const char* what) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("line " + std::to_string(line_no) + ": invalid " + what + " value '" +
                    std::string(field) + "'");
  }
  return value;
}

double parse_double(std::string_view field, std::size_t line_no, const char* what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("line " + std::to_string(line_no) + ": invalid " + what + " value '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

SurgeryRecording parse_recording_csv(const std::string& text, const std::string& id,
                                     const LoadOptions& opts, std::vector<std::string>* warnings) {
  if (text.empty()) {
    throw DataError("empty recording file: " + id);
  }
  SurgeryRecording rec;
  rec.id = id;

  std::size_t line_no = 0;
  std::size_t start = 0;
  bool saw_header = false;
  bool has_labels = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;

    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kHeader) {
        throw DataError(id + ": bad header line, expected '" + std::string(kHeader) + "'");
      }
      saw_header = true;
      continue;
    }

    const auto fields = split_line(line);
    if (fields.size() != kColumns) {
      throw DataError(id + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(kColumns) + " columns, got " + std::to_string(fields.size()));
    }

    SignalFrame frame;
    const long t = parse_long(fields[0], line_no, "timestamp");
    if (t < 0) {
      throw DataError(id + ": line " + std::to_string(line_no) + ": negative timestamp");
    }
    frame.t = static_cast<int>(t);
    for (int b = 0; b < kNumBinary; ++b) {
      const long v = parse_long(fields[1 + static_cast<std::size_t>(b)], line_no, "binary");
      if (v != 0 && v != 1) {
        throw DataError(id + ": line " + std::to_string(line_no) + ": invalid binary value '" +
                        std::to_string(v) + "' in column b" + std::to_string(b + 1));
      }
      frame.binary[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(v);
    }
    for (int a = 0; a < kNumAnalog; ++a) {
      const double v =
          parse_double(fields[1 + kNumBinary + static_cast<std::size_t>(a)], line_no, "analog");
      if (!std::isfinite(v)) {
        throw DataError(id + ": line " + std::to_string(line_no) + ": non-finite analog value");
      }
      frame.analog[static_cast<std::size_t>(a)] = v;
    }

    const std::string_view phase_field = fields[kColumns - 1];
    if (rec.frames.empty()) {
      has_labels = !phase_field.empty();
    } else if (has_labels == phase_field.empty()) {
      throw DataError(id + ": line " + std::to_string(line_no) +
                      ": mixed labeled and unlabeled rows");
    }
    if (has_labels) {
      const long phase = parse_long(phase_field, line_no, "phase");
      if (phase < 1 || phase > kNumPhases) {
        throw DataError(id + ": line " + std::to_string(line_no) + ": phase out of range 1..7");
      }
      rec.labels.push_back(static_cast<int>(phase) - 1);
    }

    if (!rec.frames.empty() && frame.t != rec.frames.back().t + 1) {
      throw DataError(id + ": line " + std::to_string(line_no) +
                      ": timestamps must increase by exactly 1 (1 Hz grid)");
    }
    rec.frames.push_back(frame);
  }

  if (rec.frames.empty()) {
    throw DataError("empty recording file: " + id);
  }

  if (has_labels) {
    for (std::size_t t = 1; t < rec.labels.size(); ++t) {
      if (rec.labels[t] < rec.labels[t - 1]) {
        const std::string msg =
            id + ": non-monotone phase sequence at t=" + std::to_string(rec.frames[t].t);
        if (opts.strict) throw DataError(msg);
        if (warnings) warnings->push_back(msg);
      }
    }
  }
  return rec;
}

SurgeryRecording load_recording(const std::filesystem::path& path, const LoadOptions& opts,
                                std::vector<std::string>* warnings) {
  return parse_recording_csv(read_file(path), path.stem().string(), opts, warnings);
}

std::string recording_to_csv(const SurgeryRecording& rec) {
  std::string out(kHeader);
  out.push_back('\n');
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const SignalFrame& f = rec.frames[i];
    out += std::to_string(f.t);
    for (int b = 0; b < kNumBinary; ++b) {
      out.push_back(',');
      out.push_back(f.binary[static_cast<std::size_t>(b)] ? '1' : '0');
    }
    for (int a = 0; a < kNumAnalog; ++a) {
      out.push_back(',');
      out += format_double(f.analog[static_cast<std::size_t>(a)]);
    }
    out.push_back(',');
    if (rec.labeled()) {
      out += std::to_string(rec.labels[i] + 1);
    }
    out.push_back('\n');
  }
  return out;
}

void save_recording(const SurgeryRecording& rec, const std::filesystem::path& path) {
  if (rec.labeled() && rec.labels.size() != rec.frames.size()) {
    throw DataError(rec.id + ": label count does not match frame count");
  }
  write_file_atomic(path, recording_to_csv(rec));
}

std::vector<SurgeryRecording> load_dataset(const std::filesystem::path& dir,
                                           const LoadOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("no .csv recordings in " + dir.string());
  }
  std::vector<SurgeryRecording> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    out.push_back(load_recording(f, opts));
  }
  return out;
}

}  // namespace phasedet
