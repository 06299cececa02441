#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "efc/error.hpp"

namespace efc::csv {

struct Document {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// RFC-4180 style parser: comma delimiter, double-quote escaping, CRLF or LF
// line ends, quoted fields may span lines.
inline Document parse(std::string_view text) {
    Document doc;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        any_field = true;
    };
    auto end_record = [&] {
        if (!any_field && record.empty()) return;  // skip blank lines
        end_field();
        if (doc.header.empty()) {
            doc.header = std::move(record);
        } else {
            doc.rows.push_back(std::move(record));
        }
        record.clear();
        any_field = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw ValidationError("csv: unterminated quoted field at end of input");
    if (!field.empty() || any_field) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_record();
    }
    return doc;
}

inline Document read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

inline std::string escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(',');
        out << escape(fields[i]);
    }
    out.put('\n');
}

inline std::string write(const Document& doc) {
    std::ostringstream out;
    write_row(out, doc.header);
    for (const auto& row : doc.rows) write_row(out, row);
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const Document& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());
    write_row(out, doc.header);
    for (const auto& row : doc.rows) write_row(out, row);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace efc::csv
