#include "mapai/canonical.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mapai {
namespace {

void append_escaped(std::string& out, std::string_view s) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
}

void dump_value(std::string& out, const nlohmann::ordered_json& v) {
    using value_t = nlohmann::ordered_json::value_t;
    switch (v.type()) {
        case value_t::null:
            out += "null";
            break;
        case value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            break;
        case value_t::number_integer:
            out += std::to_string(v.get<std::int64_t>());
            break;
        case value_t::number_unsigned:
            out += std::to_string(v.get<std::uint64_t>());
            break;
        case value_t::number_float:
            out += canonical_number(v.get<double>());
            break;
        case value_t::string:
            append_escaped(out, v.get_ref<const std::string&>());
            break;
        case value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& item : v) {
                if (!first) out.push_back(',');
                first = false;
                dump_value(out, item);
            }
            out.push_back(']');
            break;
        }
        case value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                append_escaped(out, it.key());
                out.push_back(':');
                dump_value(out, it.value());
            }
            out.push_back('}');
            break;
        }
        default:
            throw std::invalid_argument("canonical_dump: unsupported value type");
    }
}

}  // namespace

std::string canonical_number(double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("canonical_number: value must be finite");
    }
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw std::runtime_error("canonical_number: formatting failed");
    }
    return std::string(buf.data(), end);
}

std::string canonical_dump(const nlohmann::ordered_json& value) {
    std::string out;
    out.reserve(256);
    dump_value(out, value);
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                   nullptr) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace mapai
