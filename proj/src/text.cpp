#include "bonsai/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace bonsai::text {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr std::string_view kOpenCurly = "\xE2\x80\x9C";   // U+201C
constexpr std::string_view kCloseCurly = "\xE2\x80\x9D";  // U+201D

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_quotes(std::string_view s) {
    std::string t = trim(s);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return trim(std::string_view(t).substr(1, t.size() - 2));
    if (t.size() >= kOpenCurly.size() + kCloseCurly.size() && t.starts_with(kOpenCurly) && t.ends_with(kCloseCurly)) {
        return trim(std::string_view(t).substr(kOpenCurly.size(), t.size() - kOpenCurly.size() - kCloseCurly.size()));
    }
    return t;
}

bool is_not_applicable(std::string_view response) {
    std::string t = strip_quotes(response);
    while (!t.empty() && t.back() == '.') t.pop_back();
    t = strip_quotes(t);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
    return t == "N/A" || t == "NA";
}

std::vector<std::string> enumerated_items(std::string_view response) {
    std::vector<std::size_t> starts;  // position of each "(k)"
    std::size_t pos = 0;
    for (int k = 1;; ++k) {
        const std::string marker = "(" + std::to_string(k) + ")";
        const auto hit = response.find(marker, pos);
        if (hit == std::string_view::npos) break;
        starts.push_back(hit);
        pos = hit + marker.size();
    }
    std::vector<std::string> items;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const std::size_t marker_len = ("(" + std::to_string(i + 1) + ")").size();
        const std::size_t b = starts[i] + marker_len;
        const std::size_t e = i + 1 < starts.size() ? starts[i + 1] : response.size();
        items.push_back(trim(response.substr(b, e - b)));
    }
    return items;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> token_set(std::string_view s) {
    auto tokens = tokenize(s);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

std::string fnv1a_hex(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hhmmss(double seconds) {
    const long total = seconds <= 0 ? 0 : static_cast<long>(std::floor(seconds));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02ld:%02ld:%02ld", total / 3600, (total / 60) % 60, total % 60);
    return buf;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t b = 0;
    while (b <= s.size()) {
        auto e = s.find('\n', b);
        if (e == std::string_view::npos) e = s.size();
        std::string line(s.substr(b, e - b));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
        b = e + 1;
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string enumerate(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += '\n';
        out += "(" + std::to_string(i + 1) + ") " + items[i];
    }
    return out;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

}  // namespace bonsai::text
