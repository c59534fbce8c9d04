#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bonsai::text {

std::string trim(std::string_view s);

/// Trims, then removes one layer of matching straight or curly double quotes.
std::string strip_quotes(std::string_view s);

/// True for the model's "nothing here" answer: N/A, "N/A", N/A. (any case).
bool is_not_applicable(std::string_view response);

/// Items of an inline enumeration "(1) ... (2) ... (3) ...". Markers must run
/// 1, 2, 3, ... in order; text before "(1)" is ignored. Each item is trimmed.
std::vector<std::string> enumerated_items(std::string_view response);

/// Lowercased word tokens. ASCII letters and digits form words; bytes >= 0x80
/// are kept as word characters so non-Latin text still tokenizes.
std::vector<std::string> tokenize(std::string_view s);

/// Sorted, de-duplicated tokens.
std::vector<std::string> token_set(std::string_view s);

/// 64-bit FNV-1a as 16 lowercase hex digits. Keys of mock script tables.
std::string fnv1a_hex(std::string_view s);

/// Zero-padded HH:MM:SS of floor(seconds).
std::string hhmmss(double seconds);

std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// "(1) a\n(2) b" style enumeration.
std::string enumerate(const std::vector<std::string>& items);

std::string format_fixed(double value, int decimals);

}  // namespace bonsai::text
