#include "gridflow/case_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <unordered_set>

#include "gridflow/error.hpp"

namespace gridflow {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

// ---------------------------------------------------------------------------
// MATPOWER lexer

enum class TokenType { Identifier, Number, String, Punct, Newline, End };

struct Token {
    TokenType type;
    std::string_view text;
    double number = 0.0;
    std::size_t line = 1;
    std::size_t column = 1;
};

class MatpowerLexer {
  public:
    explicit MatpowerLexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokenize() {
        std::vector<Token> tokens;
        while (pos_ < text_.size()) {
            char const c = text_[pos_];
            if (c == '%' || c == '#') {
                skip_to_eol();
            } else if (c == '\n') {
                tokens.push_back(make(TokenType::Newline, 1));
                advance(1);
            } else if (c == ' ' || c == '\t' || c == '\r') {
                advance(1);
            } else if (text_.substr(pos_, 3) == "...") {
                // continuation: rest of line is ignored, including the newline
                skip_to_eol();
                if (pos_ < text_.size()) advance(1);
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && pos_ + 1 < text_.size() &&
                        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
                tokens.push_back(number());
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                tokens.push_back(identifier());
            } else if (c == '\'' && string_allowed(tokens)) {
                tokens.push_back(string());
            } else if (std::string_view("=[]{};,-+()").find(c) != std::string_view::npos) {
                tokens.push_back(make(TokenType::Punct, 1));
                advance(1);
            } else {
                fail(line_, column_, std::string("unexpected character '") + c + "'");
            }
        }
        tokens.push_back(make(TokenType::End, 0));
        return tokens;
    }

    [[noreturn]] static void fail(std::size_t line, std::size_t column, std::string const& what) {
        throw Error(ErrorKind::SyntaxError, std::to_string(line) + ":" + std::to_string(column) + ": " + what);
    }

  private:
    Token make(TokenType type, std::size_t len) const {
        return Token{type, text_.substr(pos_, len), 0.0, line_, column_};
    }

    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i, ++pos_) {
            if (text_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
        }
    }

    void skip_to_eol() {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
    }

    // A quote opens a string unless it follows an operand (then it is a transpose).
    static bool string_allowed(std::vector<Token> const& tokens) {
        if (tokens.empty()) return true;
        auto const& prev = tokens.back();
        if (prev.type == TokenType::Newline) return true;
        return prev.type == TokenType::Punct && prev.text != "]" && prev.text != ")" && prev.text != "}";
    }

    Token number() {
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        };
        digits();
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            digits();
        }
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t exp = end + 1;
            if (exp < text_.size() && (text_[exp] == '+' || text_[exp] == '-')) ++exp;
            if (exp < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp]))) {
                end = exp;
                digits();
            }
        }
        Token tok = make(TokenType::Number, end - pos_);
        auto const* first = text_.data() + pos_;
        auto const* last = text_.data() + end;
        // from_chars does not accept a leading '.', so parse such literals via a "0" prefix
        if (*first == '.') {
            std::string padded = "0" + std::string(first, last);
            auto res = std::from_chars(padded.data(), padded.data() + padded.size(), tok.number);
            if (res.ec != std::errc{}) fail(line_, column_, "bad number");
        } else {
            auto res = std::from_chars(first, last, tok.number);
            if (res.ec != std::errc{} || res.ptr != last) fail(line_, column_, "bad number");
        }
        advance(end - pos_);
        return tok;
    }

    Token identifier() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_' || text_[end] == '.')) {
            ++end;
        }
        Token tok = make(TokenType::Identifier, end - pos_);
        advance(end - pos_);
        return tok;
    }

    Token string() {
        std::size_t const line = line_;
        std::size_t const column = column_;
        std::size_t end = pos_ + 1;
        while (end < text_.size()) {
            if (text_[end] == '\'') {
                if (end + 1 < text_.size() && text_[end + 1] == '\'') {
                    end += 2;
                    continue;
                }
                break;
            }
            if (text_[end] == '\n') fail(line, column, "unterminated string");
            ++end;
        }
        if (end >= text_.size()) fail(line, column, "unterminated string");
        Token tok = make(TokenType::String, end + 1 - pos_);
        advance(end + 1 - pos_);
        return tok;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

// ---------------------------------------------------------------------------
// MATPOWER parser

using Matrix = std::vector<std::vector<double>>;

struct MatpowerTables {
    std::optional<double> baseMVA;
    std::unordered_map<std::string, Matrix> matrices;
    std::string function_name;
};

class MatpowerParser {
  public:
    explicit MatpowerParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    MatpowerTables parse() {
        MatpowerTables out;
        while (peek().type != TokenType::End) {
            Token const& tok = peek();
            if (tok.type == TokenType::Newline || is_punct(tok, ";") || is_punct(tok, ",")) {
                ++pos_;
            } else if (tok.type == TokenType::Identifier && tok.text == "function") {
                parse_function_header(out);
            } else if (tok.type == TokenType::Identifier && tok.text.starts_with("mpc.") &&
                       is_punct(peek(1), "=")) {
                std::string const field(tok.text.substr(4));
                pos_ += 2;
                parse_assignment(field, out);
            } else {
                skip_statement();
            }
        }
        return out;
    }

  private:
    Token const& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }

    static bool is_punct(Token const& t, std::string_view p) { return t.type == TokenType::Punct && t.text == p; }

    [[noreturn]] static void fail(Token const& at, std::string const& what) {
        MatpowerLexer::fail(at.line, at.column, what);
    }

    void parse_function_header(MatpowerTables& out) {
        ++pos_;
        // function mpc = caseN
        if (peek().type == TokenType::Identifier && is_punct(peek(1), "=") &&
            peek(2).type == TokenType::Identifier) {
            out.function_name = std::string(peek(2).text);
        }
        skip_statement();
    }

    void skip_statement() {
        int depth = 0;
        while (peek().type != TokenType::End) {
            Token const& t = peek();
            if (is_punct(t, "[") || is_punct(t, "{") || is_punct(t, "(")) ++depth;
            if (is_punct(t, "]") || is_punct(t, "}") || is_punct(t, ")")) --depth;
            if (depth <= 0 && (t.type == TokenType::Newline || is_punct(t, ";"))) {
                ++pos_;
                return;
            }
            ++pos_;
        }
    }

    void parse_assignment(std::string const& field, MatpowerTables& out) {
        Token const& start = peek();
        if (is_punct(start, "[")) {
            ++pos_;
            out.matrices[field] = parse_matrix(start);
        } else if (start.type == TokenType::Number || is_punct(start, "-") || is_punct(start, "+") ||
                   start.type == TokenType::Identifier) {
            auto value = parse_scalar();
            if (field == "baseMVA") {
                if (!value) fail(start, "baseMVA must be numeric");
                out.baseMVA = *value;
            }
            skip_statement();
        } else {
            skip_statement();
        }
    }

    std::optional<double> parse_scalar() {
        double sign = 1.0;
        while (is_punct(peek(), "-") || is_punct(peek(), "+")) {
            if (is_punct(peek(), "-")) sign = -sign;
            ++pos_;
        }
        Token const& t = peek();
        if (t.type == TokenType::Number) {
            ++pos_;
            return sign * t.number;
        }
        if (t.type == TokenType::Identifier) {
            if (t.text == "Inf" || t.text == "inf") {
                ++pos_;
                return sign * std::numeric_limits<double>::infinity();
            }
            if (t.text == "NaN" || t.text == "nan") {
                ++pos_;
                return std::numeric_limits<double>::quiet_NaN();
            }
        }
        return std::nullopt;
    }

    Matrix parse_matrix(Token const& open) {
        Matrix rows;
        std::vector<double> row;
        auto flush = [&](Token const& at) {
            if (row.empty()) return;
            if (!rows.empty() && rows.front().size() != row.size()) {
                fail(at, "row has " + std::to_string(row.size()) + " columns, expected " +
                             std::to_string(rows.front().size()));
            }
            rows.push_back(std::move(row));
            row.clear();
        };
        while (true) {
            Token const& t = peek();
            if (t.type == TokenType::End) fail(open, "unterminated matrix literal");
            if (is_punct(t, "]")) {
                flush(t);
                ++pos_;
                return rows;
            }
            if (is_punct(t, ";") || t.type == TokenType::Newline) {
                flush(t);
                ++pos_;
                continue;
            }
            if (is_punct(t, ",")) {
                ++pos_;
                continue;
            }
            auto value = parse_scalar();
            if (!value) fail(t, "expected a number in matrix literal, found '" + std::string(t.text) + "'");
            row.push_back(*value);
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

Matrix const& require_table(MatpowerTables const& tables, std::string const& name, std::size_t min_columns,
                            std::vector<std::string>& warnings) {
    auto it = tables.matrices.find(name);
    if (it == tables.matrices.end()) throw Error(ErrorKind::MissingTable, "mpc." + name + " not found");
    if (!it->second.empty() && it->second.front().size() < min_columns) {
        throw Error(ErrorKind::MissingTable, "mpc." + name + " has " + std::to_string(it->second.front().size()) +
                                                 " columns, need at least " + std::to_string(min_columns));
    }
    if (!it->second.empty() && it->second.front().size() > min_columns) {
        warnings.push_back("ignored " + std::to_string(it->second.front().size() - min_columns) +
                           " extra column(s) in mpc." + name);
    }
    return it->second;
}

int as_int(double v) { return static_cast<int>(std::lround(v)); }

// ---------------------------------------------------------------------------
// JSON helpers

class JsonReader {
  public:
    static double number(ordered_json const& obj, char const* key, std::string const& path) {
        auto it = obj.find(key);
        if (it == obj.end()) throw Error(ErrorKind::SchemaError, path + "." + key + " is required");
        if (!it->is_number()) throw Error(ErrorKind::SchemaError, path + "." + key + " must be a number");
        return it->get<double>();
    }

    static double number_or(ordered_json const& obj, char const* key, std::string const& path, double fallback) {
        if (!obj.contains(key)) return fallback;
        return number(obj, key, path);
    }

    static int integer(ordered_json const& obj, char const* key, std::string const& path) {
        double const v = number(obj, key, path);
        if (v != std::floor(v)) throw Error(ErrorKind::SchemaError, path + "." + key + " must be an integer");
        return static_cast<int>(v);
    }

    static bool status(ordered_json const& obj, std::string const& path) {
        auto it = obj.find("status");
        if (it == obj.end()) return true;
        if (it->is_boolean()) return it->get<bool>();
        if (it->is_number()) return it->get<double>() > 0.0;
        throw Error(ErrorKind::SchemaError, path + ".status must be 0/1 or boolean");
    }

    static ordered_json const& array(ordered_json const& obj, char const* key, std::string const& path) {
        auto it = obj.find(key);
        if (it == obj.end()) throw Error(ErrorKind::SchemaError, path + "." + key + " is required");
        if (!it->is_array()) throw Error(ErrorKind::SchemaError, path + "." + key + " must be an array");
        return *it;
    }

    static void object(ordered_json const& v, std::string const& path) {
        if (!v.is_object()) throw Error(ErrorKind::SchemaError, path + " must be an object");
    }
};

BusType parse_bus_type(ordered_json const& v, std::string const& path) {
    if (v.is_string()) {
        auto s = v.get<std::string>();
        if (s == "PQ") return BusType::PQ;
        if (s == "PV") return BusType::PV;
        if (s == "Slack") return BusType::Slack;
    } else if (v.is_number_integer()) {
        int code = v.get<int>();
        if (code >= 1 && code <= 3) return static_cast<BusType>(code);
    }
    throw Error(ErrorKind::SchemaError, path + " must be one of \"PQ\", \"PV\", \"Slack\"");
}

char const* bus_type_name(BusType t) {
    switch (t) {
        case BusType::PQ: return "PQ";
        case BusType::PV: return "PV";
        case BusType::Slack: return "Slack";
    }
    return "PQ";
}

ErrorKind error_for(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::NoSlack: return ErrorKind::NoSlack;
        case ViolationKind::ZeroReactance: return ErrorKind::ZeroReactance;
        case ViolationKind::DanglingBranch:
        case ViolationKind::DanglingGenerator: return ErrorKind::DanglingBranch;
        default: return ErrorKind::SchemaError;
    }
}

}  // namespace

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::NoSlack: return "NoSlack";
        case ViolationKind::MultipleSlack: return "MultipleSlack";
        case ViolationKind::SlackWithoutGenerator: return "SlackWithoutGenerator";
        case ViolationKind::SelfLoop: return "SelfLoop";
        case ViolationKind::ZeroReactance: return "ZeroReactance";
        case ViolationKind::NegativeResistance: return "NegativeResistance";
        case ViolationKind::DuplicateBusId: return "DuplicateBusId";
        case ViolationKind::DanglingBranch: return "DanglingBranch";
        case ViolationKind::DanglingGenerator: return "DanglingGenerator";
        case ViolationKind::InvertedGeneratorLimits: return "InvertedGeneratorLimits";
        case ViolationKind::NonPositiveVoltage: return "NonPositiveVoltage";
        case ViolationKind::Islanded: return "Islanded";
        case ViolationKind::NonPositiveBase: return "NonPositiveBase";
    }
    return "Unknown";
}

std::vector<Violation> validate(Grid const& grid) {
    std::vector<Violation> out;
    auto add = [&](ViolationKind kind, std::string detail) { out.push_back({kind, std::move(detail)}); };

    if (!(grid.baseMVA > 0.0)) add(ViolationKind::NonPositiveBase, "baseMVA must be positive");

    std::unordered_map<int, std::size_t> index;
    std::size_t n_slack = 0;
    std::size_t slack = Grid::npos;
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        auto const& bus = grid.buses[i];
        if (!index.emplace(bus.id, i).second) add(ViolationKind::DuplicateBusId, "bus " + std::to_string(bus.id));
        if (bus.type == BusType::Slack) {
            ++n_slack;
            if (slack == Grid::npos) slack = i;
        }
    }
    if (n_slack == 0) add(ViolationKind::NoSlack, "no bus of type Slack");
    if (n_slack > 1) add(ViolationKind::MultipleSlack, std::to_string(n_slack) + " slack buses");

    std::vector<bool> has_generator(grid.buses.size(), false);
    for (auto const& gen : grid.generators) {
        auto it = index.find(gen.bus_id);
        if (it == index.end()) {
            add(ViolationKind::DanglingGenerator, "generator at unknown bus " + std::to_string(gen.bus_id));
            continue;
        }
        if (gen.Pmin > gen.Pmax) {
            add(ViolationKind::InvertedGeneratorLimits, "generator at bus " + std::to_string(gen.bus_id));
        }
        if (gen.in_service) {
            has_generator[it->second] = true;
            if (!(gen.Vg > 0.0)) {
                add(ViolationKind::NonPositiveVoltage, "generator setpoint at bus " + std::to_string(gen.bus_id));
            }
        }
    }
    if (slack != Grid::npos && !has_generator[slack]) {
        add(ViolationKind::SlackWithoutGenerator, "slack bus " + std::to_string(grid.buses[slack].id));
    }

    std::vector<std::vector<std::size_t>> neighbours(grid.buses.size());
    bool endpoints_ok = true;
    for (auto const& br : grid.branches) {
        std::string const label = std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        auto f = index.find(br.from_bus);
        auto t = index.find(br.to_bus);
        if (f == index.end() || t == index.end()) {
            add(ViolationKind::DanglingBranch, "branch " + label);
            endpoints_ok = false;
            continue;
        }
        if (br.from_bus == br.to_bus) add(ViolationKind::SelfLoop, "branch " + label);
        if (br.in_service && br.x == 0.0) add(ViolationKind::ZeroReactance, "branch " + label);
        if (br.r < 0.0) add(ViolationKind::NegativeResistance, "branch " + label);
        if (br.in_service) {
            neighbours[f->second].push_back(t->second);
            neighbours[t->second].push_back(f->second);
        }
    }

    if (slack != Grid::npos && endpoints_ok) {
        std::vector<bool> reached(grid.buses.size(), false);
        std::queue<std::size_t> frontier;
        frontier.push(slack);
        reached[slack] = true;
        while (!frontier.empty()) {
            auto u = frontier.front();
            frontier.pop();
            for (auto v : neighbours[u]) {
                if (!reached[v]) {
                    reached[v] = true;
                    frontier.push(v);
                }
            }
        }
        auto n_unreached = std::count(reached.begin(), reached.end(), false);
        if (n_unreached > 0) {
            add(ViolationKind::Islanded, std::to_string(n_unreached) + " bus(es) not connected to the slack");
        }
    }
    return out;
}

void validate_or_throw(Grid const& grid) {
    auto violations = validate(grid);
    if (violations.empty()) return;
    auto const& first = violations.front();
    throw Error(error_for(first.kind), std::string(to_string(first.kind)) + " (" + first.detail + ")");
}

CaseDocument parse_matpower(std::string_view text, std::string_view fallback_name) {
    auto tokens = MatpowerLexer(text).tokenize();
    auto tables = MatpowerParser(std::move(tokens)).parse();

    CaseDocument doc;
    doc.source_format = SourceFormat::MatpowerM;
    Grid& grid = doc.grid;
    grid.name = tables.function_name.empty() ? std::string(fallback_name) : tables.function_name;
    if (!tables.baseMVA) throw Error(ErrorKind::MissingTable, "mpc.baseMVA not found");
    grid.baseMVA = *tables.baseMVA;
    if (!(grid.baseMVA > 0.0)) throw Error(ErrorKind::SchemaError, "mpc.baseMVA must be positive");
    double const base = grid.baseMVA;

    auto const& bus = require_table(tables, "bus", 13, doc.warnings);
    auto const& gen = require_table(tables, "gen", 10, doc.warnings);
    auto const& branch = require_table(tables, "branch", 11, doc.warnings);
    for (auto const& [name, _] : tables.matrices) {
        if (name != "bus" && name != "gen" && name != "branch") {
            doc.warnings.push_back("ignored table mpc." + name);
        }
    }
    std::sort(doc.warnings.begin(), doc.warnings.end());

    for (auto const& row : bus) {
        int const code = as_int(row[1]);
        if (code < 1 || code > 3) {
            throw Error(ErrorKind::BadBusType,
                        "bus " + std::to_string(as_int(row[0])) + " has type code " + std::to_string(code));
        }
        grid.buses.push_back(Bus{
            .id = as_int(row[0]),
            .type = static_cast<BusType>(code),
            .Pd = row[2] / base,
            .Qd = row[3] / base,
            .Gs = row[4] / base,
            .Bs = row[5] / base,
            .Vm = row[7],
            .Va = row[8] * kDegToRad,
            .base_kV = row[9],
        });
    }
    for (auto const& row : gen) {
        grid.generators.push_back(Generator{
            .bus_id = as_int(row[0]),
            .Pg = row[1] / base,
            .Qg = row[2] / base,
            .Qmax = row[3] / base,
            .Qmin = row[4] / base,
            .Pmax = row[8] / base,
            .Pmin = row[9] / base,
            .Vg = row[5],
            .in_service = row[7] > 0.0,
        });
    }
    for (auto const& row : branch) {
        grid.branches.push_back(Branch{
            .from_bus = as_int(row[0]),
            .to_bus = as_int(row[1]),
            .r = row[2],
            .x = row[3],
            .b = row[4],
            .tau = row[8],
            .shift = row[9] * kDegToRad,
            .in_service = row[10] > 0.0,
        });
    }
    validate_or_throw(grid);
    grid.reindex();
    return doc;
}

CaseDocument parse_json(std::string_view text) {
    ordered_json root;
    try {
        root = ordered_json::parse(text.begin(), text.end());
    } catch (nlohmann::json::parse_error const& e) {
        throw Error(ErrorKind::SchemaError, std::string("$: invalid JSON: ") + e.what());
    }
    JsonReader::object(root, "$");

    CaseDocument doc;
    doc.source_format = SourceFormat::Json;
    Grid& grid = doc.grid;
    if (auto it = root.find("name"); it != root.end()) {
        if (!it->is_string()) throw Error(ErrorKind::SchemaError, "$.name must be a string");
        grid.name = it->get<std::string>();
    }
    grid.baseMVA = JsonReader::number(root, "baseMVA", "$");

    auto const& buses = JsonReader::array(root, "buses", "$");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        std::string const path = "$.buses[" + std::to_string(i) + "]";
        auto const& b = buses[i];
        JsonReader::object(b, path);
        if (!b.contains("type")) throw Error(ErrorKind::SchemaError, path + ".type is required");
        grid.buses.push_back(Bus{
            .id = JsonReader::integer(b, "id", path),
            .type = parse_bus_type(b["type"], path + ".type"),
            .Pd = JsonReader::number(b, "Pd", path),
            .Qd = JsonReader::number(b, "Qd", path),
            .Gs = JsonReader::number_or(b, "Gs", path, 0.0),
            .Bs = JsonReader::number_or(b, "Bs", path, 0.0),
            .Vm = JsonReader::number_or(b, "Vm", path, 1.0),
            .Va = JsonReader::number_or(b, "Va", path, 0.0),
            .base_kV = JsonReader::number_or(b, "base_kV", path, 0.0),
        });
    }
    auto const& gens = JsonReader::array(root, "generators", "$");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        std::string const path = "$.generators[" + std::to_string(i) + "]";
        auto const& g = gens[i];
        JsonReader::object(g, path);
        grid.generators.push_back(Generator{
            .bus_id = JsonReader::integer(g, "bus", path),
            .Pg = JsonReader::number(g, "Pg", path),
            .Qg = JsonReader::number_or(g, "Qg", path, 0.0),
            .Qmax = JsonReader::number_or(g, "Qmax", path, 0.0),
            .Qmin = JsonReader::number_or(g, "Qmin", path, 0.0),
            .Pmax = JsonReader::number(g, "Pmax", path),
            .Pmin = JsonReader::number(g, "Pmin", path),
            .Vg = JsonReader::number(g, "Vg", path),
            .in_service = JsonReader::status(g, path),
        });
    }
    auto const& branches = JsonReader::array(root, "branches", "$");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        std::string const path = "$.branches[" + std::to_string(i) + "]";
        auto const& b = branches[i];
        JsonReader::object(b, path);
        grid.branches.push_back(Branch{
            .from_bus = JsonReader::integer(b, "from", path),
            .to_bus = JsonReader::integer(b, "to", path),
            .r = JsonReader::number(b, "r", path),
            .x = JsonReader::number(b, "x", path),
            .b = JsonReader::number_or(b, "b", path, 0.0),
            .tau = JsonReader::number_or(b, "tau", path, 0.0),
            .shift = JsonReader::number_or(b, "shift", path, 0.0),
            .in_service = JsonReader::status(b, path),
        });
    }
    validate_or_throw(grid);
    grid.reindex();
    return doc;
}

std::string write_json(Grid const& grid) {
    ordered_json root;
    root["name"] = grid.name;
    root["baseMVA"] = grid.baseMVA;
    auto& buses = root["buses"] = ordered_json::array();
    for (auto const& b : grid.buses) {
        buses.push_back({{"id", b.id},
                         {"type", bus_type_name(b.type)},
                         {"Pd", b.Pd},
                         {"Qd", b.Qd},
                         {"Gs", b.Gs},
                         {"Bs", b.Bs},
                         {"Vm", b.Vm},
                         {"Va", b.Va},
                         {"base_kV", b.base_kV}});
    }
    auto& gens = root["generators"] = ordered_json::array();
    for (auto const& g : grid.generators) {
        gens.push_back({{"bus", g.bus_id},
                        {"Pg", g.Pg},
                        {"Qg", g.Qg},
                        {"Qmax", g.Qmax},
                        {"Qmin", g.Qmin},
                        {"Pmax", g.Pmax},
                        {"Pmin", g.Pmin},
                        {"Vg", g.Vg},
                        {"status", g.in_service ? 1 : 0}});
    }
    auto& branches = root["branches"] = ordered_json::array();
    for (auto const& br : grid.branches) {
        branches.push_back({{"from", br.from_bus},
                            {"to", br.to_bus},
                            {"r", br.r},
                            {"x", br.x},
                            {"b", br.b},
                            {"tau", br.tau},
                            {"shift", br.shift},
                            {"status", br.in_service ? 1 : 0}});
    }
    return root.dump(1, '\t') + "\n";
}

std::string read_text_file(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(std::filesystem::path const& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot rename to " + path.string() + ": " + ec.message());
}

CaseDocument load_case(std::filesystem::path const& path) {
    auto text = read_text_file(path);
    if (path.extension() == ".m") return parse_matpower(text, path.stem().string());
    return parse_json(text);
}

}  // namespace gridflow
