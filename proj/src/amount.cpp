#include "chaintrace/amount.hpp"

#include <cctype>

namespace chaintrace {

std::optional<Amount> try_parse_decimal(std::string_view text, int decimals) {
    if (text.empty() || decimals < 0 || decimals > 18) return std::nullopt;
    std::size_t dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac =
        dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) return std::nullopt;
    if (frac.size() > static_cast<std::size_t>(decimals)) {
        // Excess digits are only tolerable when they are all zero.
        for (char c : frac.substr(static_cast<std::size_t>(decimals)))
            if (c != '0') return std::nullopt;
        frac = frac.substr(0, static_cast<std::size_t>(decimals));
    }
    Amount value = 0;
    constexpr Amount kMax = INT64_MAX;
    for (char c : whole) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        if (value > (kMax - (c - '0')) / 10) return std::nullopt;
        value = value * 10 + (c - '0');
    }
    int seen = 0;
    for (char c : frac) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        if (value > (kMax - (c - '0')) / 10) return std::nullopt;
        value = value * 10 + (c - '0');
        ++seen;
    }
    for (; seen < decimals; ++seen) {
        if (value > kMax / 10) return std::nullopt;
        value *= 10;
    }
    return value;
}

Amount parse_decimal(std::string_view text, int decimals) {
    auto v = try_parse_decimal(text, decimals);
    if (!v) throw AmountError("invalid decimal amount: '" + std::string(text) + "'");
    return *v;
}

std::string format_decimal(Amount units, int decimals) {
    if (units < 0) return "-" + format_decimal(-units, decimals);  // signed nets/balances
    Amount scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    Amount whole = units / scale;
    Amount frac = units % scale;
    std::string out = std::to_string(whole);
    if (frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(f.begin(), static_cast<std::size_t>(decimals) - f.size(), '0');
        while (!f.empty() && f.back() == '0') f.pop_back();
        out += '.';
        out += f;
    }
    return out;
}

}  // namespace chaintrace
