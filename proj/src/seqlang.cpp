#include "spinterface/seqlang.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

namespace spinterface::seqlang {

namespace {

struct UnitInfo {
  const char* name;
  Dimension dim;
  int decimal_exp;  // scale = 10^decimal_exp relative to SI base
};

constexpr UnitInfo kUnits[] = {
    {"ns", Dimension::time, -9},     {"us", Dimension::time, -6},
    {"ms", Dimension::time, -3},     {"s", Dimension::time, 0},
    {"Hz", Dimension::frequency, 0}, {"kHz", Dimension::frequency, 3},
    {"MHz", Dimension::frequency, 6}, {"GHz", Dimension::frequency, 9},
    {"mT", Dimension::field, -3},    {"T", Dimension::field, 0},
    {"", Dimension::dimensionless, 0},
};

const UnitInfo& info(Unit u) { return kUnits[static_cast<int>(u)]; }

// Exact decimal-exponent shift: v * 10^k computed on the shortest decimal
// representation, so unit conversions stay clean (1e-5 s -> exactly 10 us).
double shift_decimal(double v, int k) {
  if (v == 0.0 || k == 0) return v;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  int exp = 0;
  std::string mant = s;
  const size_t epos = s.find_first_of("eE");
  if (epos != std::string::npos) {
    exp = std::atoi(s.c_str() + epos + 1);
    mant = s.substr(0, epos);
  }
  const std::string rebuilt = mant + "e" + std::to_string(exp + k);
  double out = 0.0;
  const auto rc = std::from_chars(rebuilt.data(), rebuilt.data() + rebuilt.size(), out);
  if (rc.ec != std::errc()) return v * std::pow(10.0, k);
  return out;
}

Unit base_unit(Dimension d) {
  switch (d) {
    case Dimension::time: return Unit::s;
    case Dimension::frequency: return Unit::hz;
    case Dimension::field: return Unit::t;
    default: return Unit::dimensionless;
  }
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dimension dimension_of(Unit u) { return info(u).dim; }
double unit_scale(Unit u) { return std::pow(10.0, info(u).decimal_exp); }
const char* unit_name(Unit u) { return info(u).name; }

Quantity Quantity::canonical() const {
  const Dimension dim = dimension_of(unit);
  if (dim == Dimension::dimensionless) return *this;
  if (magnitude == 0.0) return Quantity{0.0, base_unit(dim)};

  // candidate units of this dimension, largest scale first
  std::vector<Unit> candidates;
  for (int i = 0; i < static_cast<int>(std::size(kUnits)); ++i)
    if (kUnits[i].dim == dim) candidates.push_back(static_cast<Unit>(i));
  std::sort(candidates.begin(), candidates.end(),
            [](Unit a, Unit b) { return info(a).decimal_exp > info(b).decimal_exp; });

  for (Unit u : candidates) {
    const double m = shift_decimal(magnitude, info(unit).decimal_exp - info(u).decimal_exp);
    if (std::abs(m) >= 1.0) return Quantity{m, u};
  }
  const Unit smallest = candidates.back();
  return Quantity{shift_decimal(magnitude, info(unit).decimal_exp - info(smallest).decimal_exp),
                  smallest};
}

bool Quantity::operator==(const Quantity& other) const {
  const Quantity a = canonical(), b = other.canonical();
  return a.unit == b.unit && a.magnitude == b.magnitude;
}

bool Arg::operator==(const Arg& other) const {
  if (is_variable() != other.is_variable()) return false;
  if (is_variable()) return variable == other.variable;
  return *value == *other.value;
}

bool LaserStmt::operator==(const LaserStmt& o) const {
  return duration == o.duration && power == o.power;
}
bool WaitStmt::operator==(const WaitStmt& o) const { return duration == o.duration; }
bool MwStmt::operator==(const MwStmt& o) const {
  return angle == o.angle && duration == o.duration && frequency == o.frequency &&
         amplitude == o.amplitude && phase == o.phase;
}
bool MeasureStmt::operator==(const MeasureStmt& o) const { return window == o.window; }
bool SweepStmt::operator==(const SweepStmt& o) const {
  return variable == o.variable && start == o.start && stop == o.stop && steps == o.steps &&
         body == o.body;
}
bool PulseSequence::operator==(const PulseSequence& other) const {
  return statements == other.statements;
}

ParseError::ParseError(std::string file, SourcePos p, const std::string& message,
                       std::vector<std::string> exp)
    : std::runtime_error(file + ":" + std::to_string(p.line) + ":" + std::to_string(p.col) +
                         ": " + message),
      pos(p),
      expected(std::move(exp)) {}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

std::vector<Token> tokenize(const std::string& text, const std::string& file) {
  std::vector<Token> tokens;
  int line = 1, col = 1;
  size_t i = 0;
  const size_t n = text.size();

  auto pos = [&]() { return SourcePos{line, col}; };
  auto advance = [&](size_t k) {
    for (size_t j = 0; j < k; ++j) {
      if (text[i + j] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += k;
  };

  while (i < n) {
    const char c = text[i];
    if (c == '#') {
      while (i < n && text[i] != '\n') advance(1);
      continue;
    }
    if (c == '\n') {
      tokens.push_back({Token::Kind::newline, "\n", {}, pos()});
      advance(1);
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
      continue;
    }
    if (c == '=') {
      tokens.push_back({Token::Kind::equals, "=", {}, pos()});
      advance(1);
      continue;
    }
    if (c == '{') {
      tokens.push_back({Token::Kind::lbrace, "{", {}, pos()});
      advance(1);
      continue;
    }
    if (c == '}') {
      tokens.push_back({Token::Kind::rbrace, "}", {}, pos()});
      advance(1);
      continue;
    }
    if (c == '.' && i + 1 < n && text[i + 1] == '.') {
      tokens.push_back({Token::Kind::dotdot, "..", {}, pos()});
      advance(2);
      continue;
    }
    const bool num_start =
        std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '.') && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1])));
    if (num_start) {
      const SourcePos start = pos();
      double value = 0.0;
      // stop the number before a '..' range separator
      size_t num_end = i;
      while (num_end < n) {
        const char d = text[num_end];
        if (d == '.' && num_end + 1 < n && text[num_end + 1] == '.') break;
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' ||
            (num_end == i && d == '-') ||
            ((d == 'e' || d == 'E') && num_end + 1 < n &&
             (std::isdigit(static_cast<unsigned char>(text[num_end + 1])) ||
              text[num_end + 1] == '-' || text[num_end + 1] == '+')) ||
            ((d == '-' || d == '+') && num_end > i &&
             (text[num_end - 1] == 'e' || text[num_end - 1] == 'E'))) {
          ++num_end;
        } else {
          break;
        }
      }
      const auto rc = std::from_chars(text.data() + i, text.data() + num_end, value);
      if (rc.ec != std::errc() || rc.ptr != text.data() + num_end)
        throw ParseError(file, start, "malformed number");
      size_t suffix_end = num_end;
      while (suffix_end < n && std::isalpha(static_cast<unsigned char>(text[suffix_end])))
        ++suffix_end;
      const std::string suffix = text.substr(num_end, suffix_end - num_end);
      Unit unit = Unit::dimensionless;
      bool found = suffix.empty();
      for (int u = 0; u < static_cast<int>(std::size(kUnits)); ++u) {
        if (suffix == kUnits[u].name && !suffix.empty()) {
          unit = static_cast<Unit>(u);
          found = true;
          break;
        }
      }
      if (!found) throw ParseError(file, start, "unknown unit suffix '" + suffix + "'");
      if (dimension_of(unit) != Dimension::dimensionless && value < 0.0)
        throw ParseError(file, start, "time/frequency/field quantities must be >= 0");
      if (!std::isfinite(value)) throw ParseError(file, start, "non-finite quantity");
      tokens.push_back({Token::Kind::quantity, text.substr(i, suffix_end - i),
                        Quantity{value, unit}, start});
      advance(suffix_end - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const SourcePos start = pos();
      size_t end = i;
      while (end < n &&
             (std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_'))
        ++end;
      std::string ident = text.substr(i, end - i);
      if (ident == "pi" && end + 1 < n && text[end] == '/' && text[end + 1] == '2') {
        ident = "pi/2";
        end += 2;
      }
      tokens.push_back({Token::Kind::ident, ident, {}, start});
      advance(end - i);
      continue;
    }
    throw ParseError(file, pos(), std::string("illegal character '") + c + "'");
  }
  tokens.push_back({Token::Kind::eof, "", {}, pos()});
  return tokens;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  Parser(const std::vector<Token>& tokens, std::string file)
      : tokens_(tokens), file_(std::move(file)) {}

  PulseSequence parse_program() {
    PulseSequence seq;
    seq.source_file = file_;
    seq.statements = parse_statements(/*in_braces=*/false);
    return seq;
  }

 private:
  const std::vector<Token>& tokens_;
  std::string file_;
  size_t idx_ = 0;

  const Token& peek(size_t k = 0) const {
    return tokens_[std::min(idx_ + k, tokens_.size() - 1)];
  }
  const Token& next() { return tokens_[std::min(idx_++, tokens_.size() - 1)]; }

  [[noreturn]] void fail(const Token& tok, const std::string& msg,
                         std::vector<std::string> expected = {}) {
    throw ParseError(file_, tok.pos, msg, std::move(expected));
  }

  void skip_newlines() {
    while (peek().kind == Token::Kind::newline) next();
  }

  std::vector<Statement> parse_statements(bool in_braces) {
    std::vector<Statement> stmts;
    for (;;) {
      skip_newlines();
      const Token& tok = peek();
      if (tok.kind == Token::Kind::eof) {
        if (in_braces) fail(tok, "unexpected end of input, expected '}'", {"}"});
        break;
      }
      if (tok.kind == Token::Kind::rbrace) {
        if (!in_braces) fail(tok, "unexpected '}'");
        break;
      }
      stmts.push_back(parse_statement());
    }
    return stmts;
  }

  Statement parse_statement() {
    const Token& tok = peek();
    if (tok.kind != Token::Kind::ident)
      fail(tok, "expected a statement",
           {"laser", "wait", "mw", "measure", "sweep"});
    if (tok.text == "laser") return parse_laser();
    if (tok.text == "wait") return parse_wait();
    if (tok.text == "mw") return parse_mw();
    if (tok.text == "measure") return parse_measure();
    if (tok.text == "sweep") return parse_sweep();
    fail(tok, "unknown statement '" + tok.text + "'",
         {"laser", "wait", "mw", "measure", "sweep"});
  }

  Arg parse_arg(Dimension expected, const char* slot_name) {
    const Token& tok = next();
    if (tok.kind == Token::Kind::quantity) {
      if (dimension_of(tok.quantity.unit) != expected)
        fail(tok, std::string("unit of '") + tok.text + "' does not fit the " + slot_name +
                      " slot");
      return Arg{tok.quantity, {}};
    }
    if (tok.kind == Token::Kind::ident) return Arg{std::nullopt, tok.text};
    fail(tok, std::string("expected a quantity or variable for ") + slot_name,
         {"<quantity>", "<identifier>"});
  }

  // trailing `key=value` options on the current line
  void parse_options(const std::vector<std::pair<std::string, Dimension>>& allowed,
                     std::map<std::string, Arg>& out) {
    while (peek().kind == Token::Kind::ident && peek(1).kind == Token::Kind::equals) {
      const Token key = next();
      next();  // '='
      auto it = std::find_if(allowed.begin(), allowed.end(),
                             [&](const auto& kv) { return kv.first == key.text; });
      if (it == allowed.end()) {
        std::vector<std::string> names;
        for (const auto& kv : allowed) names.push_back(kv.first + "=");
        fail(key, "unknown option '" + key.text + "'", names);
      }
      out[key.text] = parse_arg(it->second, key.text.c_str());
    }
  }

  Statement parse_laser() {
    const Token kw = next();
    LaserStmt stmt;
    stmt.pos = kw.pos;
    stmt.duration = parse_arg(Dimension::time, "duration");
    std::map<std::string, Arg> opts;
    parse_options({{"power", Dimension::dimensionless}}, opts);
    if (opts.count("power")) stmt.power = opts["power"];
    return stmt;
  }

  Statement parse_wait() {
    const Token kw = next();
    WaitStmt stmt;
    stmt.pos = kw.pos;
    stmt.duration = parse_arg(Dimension::time, "duration");
    return stmt;
  }

  Statement parse_mw() {
    const Token kw = next();
    MwStmt stmt;
    stmt.pos = kw.pos;
    const Token& spec = peek();
    if (spec.kind == Token::Kind::ident && spec.text == "pi") {
      stmt.angle = MwAngle::pi;
      next();
    } else if (spec.kind == Token::Kind::ident && spec.text == "pi/2") {
      stmt.angle = MwAngle::half_pi;
      next();
    } else {
      stmt.duration = parse_arg(Dimension::time, "duration");
    }
    std::map<std::string, Arg> opts;
    parse_options({{"f", Dimension::frequency},
                   {"a", Dimension::dimensionless},
                   {"phase", Dimension::dimensionless}},
                  opts);
    if (opts.count("f")) stmt.frequency = opts["f"];
    if (opts.count("a")) stmt.amplitude = opts["a"];
    if (opts.count("phase")) stmt.phase = opts["phase"];
    return stmt;
  }

  Statement parse_measure() {
    const Token kw = next();
    MeasureStmt stmt;
    stmt.pos = kw.pos;
    stmt.window = parse_arg(Dimension::time, "window");
    return stmt;
  }

  Statement parse_sweep() {
    const Token kw = next();
    SweepStmt stmt;
    stmt.pos = kw.pos;
    const Token& var = next();
    if (var.kind != Token::Kind::ident)
      fail(var, "expected sweep variable name", {"<identifier>"});
    stmt.variable = var.text;

    const Token& start = next();
    if (start.kind != Token::Kind::quantity)
      fail(start, "expected sweep start quantity", {"<quantity>"});
    stmt.start = start.quantity;

    const Token& dots = next();
    if (dots.kind != Token::Kind::dotdot) fail(dots, "expected '..'", {".."});

    const Token& stop = next();
    if (stop.kind != Token::Kind::quantity)
      fail(stop, "expected sweep stop quantity", {"<quantity>"});
    stmt.stop = stop.quantity;
    if (dimension_of(stmt.start.unit) != dimension_of(stmt.stop.unit))
      fail(stop, "sweep bounds have mismatched units");

    const Token& nkey = next();
    if (nkey.kind != Token::Kind::ident || nkey.text != "n")
      fail(nkey, "expected 'n=<steps>'", {"n="});
    const Token& eq = next();
    if (eq.kind != Token::Kind::equals) fail(eq, "expected '='", {"="});
    const Token& steps = next();
    if (steps.kind != Token::Kind::quantity ||
        dimension_of(steps.quantity.unit) != Dimension::dimensionless ||
        steps.quantity.magnitude != std::floor(steps.quantity.magnitude))
      fail(steps, "expected an integer step count", {"<integer>"});
    stmt.steps = static_cast<int>(steps.quantity.magnitude);

    skip_newlines();
    const Token& lb = next();
    if (lb.kind != Token::Kind::lbrace) fail(lb, "expected '{'", {"{"});
    stmt.body = parse_statements(/*in_braces=*/true);
    next();  // '}'
    return stmt;
  }
};

}  // namespace

PulseSequence parse(const std::vector<Token>& tokens, const std::string& file) {
  return Parser(tokens, file).parse_program();
}

PulseSequence parse_text(const std::string& text, const std::string& file) {
  return parse(tokenize(text, file), file);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

struct Binding {
  Dimension dim;
  double max_abs_si;
};

void check_arg(const Arg& arg, Dimension expected, const SourcePos& pos,
               const std::map<std::string, Binding>& env, const std::string& file) {
  if (!arg.is_variable()) {
    if (dimension_of(arg.value->unit) != expected)
      throw ParseError(file, pos, "quantity dimension does not fit this slot");
    return;
  }
  auto it = env.find(arg.variable);
  if (it == env.end())
    throw ParseError(file, pos, "unbound sweep variable '" + arg.variable + "'");
  if (it->second.dim != expected)
    throw ParseError(file, pos,
                     "sweep variable '" + arg.variable + "' has the wrong dimension here");
}

bool references_variable(const std::vector<Statement>& stmts, const std::string& name);

bool arg_refs(const Arg& a, const std::string& name) {
  return a.is_variable() && a.variable == name;
}

bool references_variable(const Statement& stmt, const std::string& name) {
  if (const auto* laser = std::get_if<LaserStmt>(&stmt))
    return arg_refs(laser->duration, name) || arg_refs(laser->power, name);
  if (const auto* wait = std::get_if<WaitStmt>(&stmt)) return arg_refs(wait->duration, name);
  if (const auto* mw = std::get_if<MwStmt>(&stmt))
    return arg_refs(mw->duration, name) || (mw->frequency && arg_refs(*mw->frequency, name)) ||
           arg_refs(mw->amplitude, name) || arg_refs(mw->phase, name);
  if (const auto* meas = std::get_if<MeasureStmt>(&stmt)) return arg_refs(meas->window, name);
  if (const auto* sweep = std::get_if<SweepStmt>(&stmt))
    return references_variable(sweep->body, name);
  return false;
}

bool references_variable(const std::vector<Statement>& stmts, const std::string& name) {
  return std::any_of(stmts.begin(), stmts.end(),
                     [&](const Statement& s) { return references_variable(s, name); });
}

// upper bound on the summed duration over the whole expansion
double duration_bound(const std::vector<Statement>& stmts, std::map<std::string, Binding>& env,
                      const ValidationContext& vctx, const std::string& file);

double arg_bound(const Arg& a, const std::map<std::string, Binding>& env) {
  if (!a.is_variable()) return std::abs(a.value->si());
  return env.at(a.variable).max_abs_si;
}

double duration_bound(const std::vector<Statement>& stmts, std::map<std::string, Binding>& env,
                      const ValidationContext& vctx, const std::string& file) {
  double total = 0.0;
  for (const Statement& stmt : stmts) {
    if (const auto* laser = std::get_if<LaserStmt>(&stmt))
      total += arg_bound(laser->duration, env);
    else if (const auto* wait = std::get_if<WaitStmt>(&stmt))
      total += arg_bound(wait->duration, env);
    else if (const auto* mw = std::get_if<MwStmt>(&stmt))
      total += mw->angle == MwAngle::none ? arg_bound(mw->duration, env) : 0.0;
    else if (const auto* sweep = std::get_if<SweepStmt>(&stmt)) {
      env[sweep->variable] = {dimension_of(sweep->start.unit),
                              std::max(std::abs(sweep->start.si()), std::abs(sweep->stop.si()))};
      total += std::max(1, sweep->steps) * duration_bound(sweep->body, env, vctx, file);
      env.erase(sweep->variable);
    }
  }
  return total;
}

void validate_statements(std::vector<Statement>& stmts, std::map<std::string, Binding>& env,
                         const ValidationContext& vctx, const std::string& file) {
  for (Statement& stmt : stmts) {
    if (auto* laser = std::get_if<LaserStmt>(&stmt)) {
      check_arg(laser->duration, Dimension::time, laser->pos, env, file);
      check_arg(laser->power, Dimension::dimensionless, laser->pos, env, file);
    } else if (auto* wait = std::get_if<WaitStmt>(&stmt)) {
      check_arg(wait->duration, Dimension::time, wait->pos, env, file);
    } else if (auto* mw = std::get_if<MwStmt>(&stmt)) {
      if (mw->angle != MwAngle::none) {
        if (!vctx.rabi_frequency_hz)
          throw ParseError(file, mw->pos,
                           "angle-form microwave pulse requires a Rabi calibration");
        const double t_pi = 1.0 / (2.0 * *vctx.rabi_frequency_hz);
        const double t = mw->angle == MwAngle::pi ? t_pi : 0.5 * t_pi;
        mw->duration = Arg{Quantity{t, Unit::s}.canonical(), {}};
      } else {
        check_arg(mw->duration, Dimension::time, mw->pos, env, file);
      }
      if (mw->frequency) {
        check_arg(*mw->frequency, Dimension::frequency, mw->pos, env, file);
        if (!mw->frequency->is_variable()) {
          if (vctx.transition_freqs_ghz.empty())
            throw ParseError(file, mw->pos, "no microwave transitions available");
          const double f_ghz = mw->frequency->value->si() * 1e-9;
          double best = std::numeric_limits<double>::infinity();
          for (double ft : vctx.transition_freqs_ghz) best = std::min(best, std::abs(f_ghz - ft));
          if (best > vctx.max_detuning_ghz)
            throw ParseError(file, mw->pos, "microwave frequency addresses no known transition");
        }
      }
      check_arg(mw->amplitude, Dimension::dimensionless, mw->pos, env, file);
      check_arg(mw->phase, Dimension::dimensionless, mw->pos, env, file);
    } else if (auto* meas = std::get_if<MeasureStmt>(&stmt)) {
      check_arg(meas->window, Dimension::time, meas->pos, env, file);
    } else if (auto* sweep = std::get_if<SweepStmt>(&stmt)) {
      if (sweep->body.empty())
        throw ParseError(file, sweep->pos, "sweep body must not be empty");
      if (env.count(sweep->variable))
        throw ParseError(file, sweep->pos,
                         "nested sweep reuses variable '" + sweep->variable + "'");
      if (!references_variable(sweep->body, sweep->variable))
        throw ParseError(file, sweep->pos,
                         "sweep variable '" + sweep->variable + "' is never referenced");
      env[sweep->variable] = {dimension_of(sweep->start.unit),
                              std::max(std::abs(sweep->start.si()), std::abs(sweep->stop.si()))};
      validate_statements(sweep->body, env, vctx, file);
      env.erase(sweep->variable);
    }
  }
}

}  // namespace

PulseSequence validate(const PulseSequence& seq, const ValidationContext& ctx) {
  PulseSequence out = seq;
  std::map<std::string, Binding> env;
  validate_statements(out.statements, env, ctx, out.source_file);
  env.clear();
  const double bound = duration_bound(out.statements, env, ctx, out.source_file);
  if (!(bound < ctx.max_total_duration_s))
    throw ParseError(out.source_file, SourcePos{1, 1},
                     "total expanded duration exceeds the configured cap");
  out.validated = true;
  return out;
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

namespace {

Arg substitute(const Arg& arg, const std::map<std::string, Quantity>& env) {
  if (!arg.is_variable()) return arg;
  auto it = env.find(arg.variable);
  if (it == env.end()) return arg;
  return Arg{it->second, {}};
}

// depth-first search for the first sweep statement
const SweepStmt* find_sweep(const std::vector<Statement>& stmts) {
  for (const Statement& s : stmts)
    if (const auto* sweep = std::get_if<SweepStmt>(&s)) return sweep;
  return nullptr;
}

std::vector<Statement> splice_first_sweep(const std::vector<Statement>& stmts,
                                          const Quantity& value, const std::string& var) {
  std::vector<Statement> out;
  bool done = false;
  for (const Statement& s : stmts) {
    if (!done && std::holds_alternative<SweepStmt>(s)) {
      const auto& sweep = std::get<SweepStmt>(s);
      if (sweep.variable == var) {
        out.insert(out.end(), sweep.body.begin(), sweep.body.end());
        done = true;
        continue;
      }
    }
    out.push_back(s);
  }
  return out;
}

Statement substitute_statement(const Statement& stmt, const std::map<std::string, Quantity>& env) {
  Statement out = stmt;
  if (auto* laser = std::get_if<LaserStmt>(&out)) {
    laser->duration = substitute(laser->duration, env);
    laser->power = substitute(laser->power, env);
  } else if (auto* wait = std::get_if<WaitStmt>(&out)) {
    wait->duration = substitute(wait->duration, env);
  } else if (auto* mw = std::get_if<MwStmt>(&out)) {
    mw->duration = substitute(mw->duration, env);
    if (mw->frequency) mw->frequency = substitute(*mw->frequency, env);
    mw->amplitude = substitute(mw->amplitude, env);
    mw->phase = substitute(mw->phase, env);
  } else if (auto* meas = std::get_if<MeasureStmt>(&out)) {
    meas->window = substitute(meas->window, env);
  }
  return out;
}

void expand_rec(const std::vector<Statement>& stmts, std::map<std::string, Quantity>& env,
                std::vector<std::pair<std::string, double>>& point, Expansion& out,
                const std::string& file) {
  const SweepStmt* sweep = find_sweep(stmts);
  if (sweep == nullptr) {
    // look for nested sweeps inside already-spliced bodies: none remain here
    PulseSequence seq;
    seq.source_file = file;
    seq.validated = true;
    for (const Statement& s : stmts) seq.statements.push_back(substitute_statement(s, env));
    std::vector<double> values;
    for (const auto& [name, v] : point) values.push_back(v);
    out.sweep_values_si.push_back(std::move(values));
    out.sequences.push_back(std::move(seq));
    return;
  }
  if (sweep->steps < 2) throw std::domain_error("expand: sweep step count must be >= 2");
  if (std::find(out.sweep_names.begin(), out.sweep_names.end(), sweep->variable) ==
      out.sweep_names.end())
    out.sweep_names.push_back(sweep->variable);

  const double start_si = sweep->start.si();
  const double stop_si = sweep->stop.si();
  const double scale = unit_scale(sweep->start.unit);
  for (int i = 0; i < sweep->steps; ++i) {
    const double v_si = start_si + (stop_si - start_si) * i / (sweep->steps - 1);
    const Quantity q{v_si / scale, sweep->start.unit};
    env[sweep->variable] = q;
    point.emplace_back(sweep->variable, v_si);
    expand_rec(splice_first_sweep(stmts, q, sweep->variable), env, point, out, file);
    point.pop_back();
    env.erase(sweep->variable);
  }
}

}  // namespace

Expansion expand(const PulseSequence& seq) {
  Expansion out;
  std::map<std::string, Quantity> env;
  std::vector<std::pair<std::string, double>> point;
  expand_rec(seq.statements, env, point, out, seq.source_file);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string quantity_text(const Quantity& q) {
  const Quantity c = q.canonical();
  return format_number(c.magnitude) + unit_name(c.unit);
}

std::string arg_text(const Arg& a) {
  if (a.is_variable()) return a.variable;
  return quantity_text(*a.value);
}

void serialize_statements(const std::vector<Statement>& stmts, int indent, std::string& out) {
  const std::string pad(indent, ' ');
  const Arg one{Quantity{1.0, Unit::dimensionless}, {}};
  const Arg zero{Quantity{0.0, Unit::dimensionless}, {}};
  for (const Statement& stmt : stmts) {
    if (const auto* laser = std::get_if<LaserStmt>(&stmt)) {
      out += pad + "laser " + arg_text(laser->duration);
      if (!(laser->power == one)) out += " power=" + arg_text(laser->power);
      out += "\n";
    } else if (const auto* wait = std::get_if<WaitStmt>(&stmt)) {
      out += pad + "wait " + arg_text(wait->duration) + "\n";
    } else if (const auto* mw = std::get_if<MwStmt>(&stmt)) {
      out += pad + "mw ";
      if (mw->angle == MwAngle::pi)
        out += "pi";
      else if (mw->angle == MwAngle::half_pi)
        out += "pi/2";
      else
        out += arg_text(mw->duration);
      if (mw->frequency) out += " f=" + arg_text(*mw->frequency);
      if (!(mw->amplitude == one)) out += " a=" + arg_text(mw->amplitude);
      if (!(mw->phase == zero)) out += " phase=" + arg_text(mw->phase);
      out += "\n";
    } else if (const auto* meas = std::get_if<MeasureStmt>(&stmt)) {
      out += pad + "measure " + arg_text(meas->window) + "\n";
    } else if (const auto* sweep = std::get_if<SweepStmt>(&stmt)) {
      out += pad + "sweep " + sweep->variable + " " + quantity_text(sweep->start) + ".." +
             quantity_text(sweep->stop) + " n=" + std::to_string(sweep->steps) + " {\n";
      serialize_statements(sweep->body, indent + 2, out);
      out += pad + "}\n";
    }
  }
}

}  // namespace

std::string serialize(const PulseSequence& seq) {
  std::string out;
  serialize_statements(seq.statements, 0, out);
  return out;
}

}  // namespace spinterface::seqlang
