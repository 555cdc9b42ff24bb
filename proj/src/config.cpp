#include "cbwk/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cbwk {

namespace {

class Parser {
public:
    Parser(const std::string& text, const std::string& origin) : s_(text), origin_(origin) {}

    ConfigDocument run() {
        ConfigDocument doc;
        doc.origin = origin_;
        std::string table;
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                ++pos_;
                skip_space();
                table = read_key();
                skip_space();
                expect(']');
                finish_line();
                continue;
            }
            const int line = line_;
            const std::string key = read_key();
            skip_space();
            expect('=');
            skip_space();
            ConfigValue value = read_value();
            value.line = line;
            finish_line();
            const std::string full = table.empty() ? key : table + "." + key;
            if (!doc.entries.emplace(full, std::move(value)).second) fail(line, "duplicate key '" + full + "'");
        }
        return doc;
    }

private:
    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + what);
    }
    [[noreturn]] void fail(const std::string& what) const { fail(line_, what); }

    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }

    void skip_space() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#')
            while (!at_end() && peek() != '\n') ++pos_;
    }
    void newline() {
        ++pos_;
        ++line_;
    }
    void skip_blank_lines() {
        while (!at_end()) {
            skip_space();
            skip_comment();
            if (peek() == '\n') {
                newline();
                continue;
            }
            break;
        }
    }
    // Inside arrays, newlines and comments are whitespace.
    void skip_array_space() {
        while (!at_end()) {
            skip_space();
            skip_comment();
            if (peek() != '\n') break;
            newline();
        }
    }
    void finish_line() {
        skip_space();
        skip_comment();
        if (at_end()) return;
        if (peek() != '\n') fail("unexpected text after value");
        newline();
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string read_key() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
            ++pos_;
        if (pos_ == start) fail("expected a key");
        return s_.substr(start, pos_ - start);
    }

    ConfigValue read_value() {
        ConfigValue v;
        v.line = line_;
        const char c = peek();
        if (c == '"') {
            ++pos_;
            v.kind = ConfigValue::Kind::string;
            while (!at_end() && peek() != '"' && peek() != '\n') {
                if (peek() == '\\') {
                    ++pos_;
                    const char e = peek();
                    if (e == 'n') v.text += '\n';
                    else if (e == 't') v.text += '\t';
                    else if (e == '"' || e == '\\') v.text += e;
                    else fail("unsupported escape in string");
                    ++pos_;
                    continue;
                }
                v.text += s_[pos_++];
            }
            expect('"');
            return v;
        }
        if (c == '[') {
            ++pos_;
            v.kind = ConfigValue::Kind::array;
            skip_array_space();
            while (peek() != ']') {
                if (at_end()) fail(v.line, "unterminated array");
                v.items.push_back(read_value());
                skip_array_space();
                if (peek() == ',') {
                    ++pos_;
                    skip_array_space();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
            ++pos_;
            return v;
        }
        std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                             peek() == '-' || peek() == '_'))
            ++pos_;
        const std::string word = s_.substr(start, pos_ - start);
        if (word.empty()) fail("expected a value");
        if (word == "true" || word == "false") {
            v.kind = ConfigValue::Kind::boolean;
            v.boolean = word == "true";
            return v;
        }
        std::string digits;
        for (char ch : word)
            if (ch != '_') digits += ch;
        std::istringstream in(digits);
        in.imbue(std::locale::classic());
        double x = 0.0;
        if (digits == "inf" || digits == "+inf") x = INFINITY;
        else if (digits == "-inf") x = -INFINITY;
        else if (digits == "nan") x = NAN;
        else if (!(in >> x) || !in.eof()) fail("cannot read value '" + word + "'");
        v.kind = ConfigValue::Kind::number;
        v.number = x;
        v.integral = digits.find_first_of(".eEin") == std::string::npos;
        return v;
    }

    const std::string& s_;
    std::string origin_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

[[noreturn]] void bad_type(const std::string& key, const ConfigValue& v, const char* wanted) {
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " must be " + wanted);
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& origin) {
    return Parser(text, origin).run();
}

ConfigDocument ConfigDocument::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

double as_double(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::number) bad_type(key, v, "a number");
    return v.number;
}

std::int64_t as_integer(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::number || !v.integral || !std::isfinite(v.number))
        bad_type(key, v, "an integer");
    return static_cast<std::int64_t>(v.number);
}

std::size_t as_count(const std::string& key, const ConfigValue& v) {
    const auto n = as_integer(key, v);
    if (n < 0) bad_type(key, v, "a nonnegative integer");
    return static_cast<std::size_t>(n);
}

bool as_bool(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::boolean) bad_type(key, v, "true or false");
    return v.boolean;
}

std::string as_string(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::string) bad_type(key, v, "a string");
    return v.text;
}

std::vector<double> as_doubles(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::array) bad_type(key, v, "an array of numbers");
    std::vector<double> out;
    for (const auto& item : v.items) out.push_back(as_double(key, item));
    return out;
}

}  // namespace cbwk
