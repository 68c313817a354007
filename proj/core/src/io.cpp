#include "plstm/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plstm/errors.hpp"

namespace plstm {

std::string fmt_double(double v) {
  // Shortest string over all precisions that parses back bit-exactly; lower
  // precision wins ties so 100 beats 1e+02.
  char buf[40];
  std::string best;
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v && (best.empty() || std::char_traits<char>::length(buf) <
                                          best.size()))
      best = buf;
  }
  if (!best.empty()) return best;
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(detail::cat("cannot open ", path, " for writing"));
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw FormatError(detail::cat("csv row has ", row.size(),
                                    " cells for a ", header.size(),
                                    "-column header"));
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  }
  out.flush();
  if (!out) throw FormatError(detail::cat("short write to ", path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(detail::cat("cannot open ", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw FormatError(detail::cat("read failure on ", path));
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(detail::cat("cannot open ", path, " for writing"));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw FormatError(detail::cat("short write to ", path));
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw FormatError(detail::cat("cannot create directory ", path, ": ",
                                  ec.message()));
  if (!std::filesystem::is_directory(path))
    throw FormatError(detail::cat(path, " exists and is not a directory"));
}

}  // namespace plstm
