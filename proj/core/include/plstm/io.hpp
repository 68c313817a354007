#pragma once

#include <string>
#include <vector>

namespace plstm {

// Shortest decimal form that round-trips the exact double (%.17g trimmed);
// deterministic, locale-free.
std::string fmt_double(double v);

// One CSV file in a single call; throws FormatError when the path cannot be
// opened or fully written. Cells are written verbatim (no quoting; callers
// keep commas out of cell values).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);  // FormatError on failure
void write_text_file(const std::string& path, const std::string& content);

// Creates the directory (and parents) if missing; error if a file is in the
// way.
void ensure_directory(const std::string& path);

}  // namespace plstm
