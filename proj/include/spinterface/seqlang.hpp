#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace spinterface::seqlang {

enum class Unit { ns, us, ms, s, hz, khz, mhz, ghz, mt, t, dimensionless };
enum class Dimension { time, frequency, field, dimensionless };

Dimension dimension_of(Unit u);
double unit_scale(Unit u);  // factor to SI base (s, Hz, T) or 1
const char* unit_name(Unit u);

/// Magnitude plus unit, kept as written; canonicalize() rescales to the largest
/// unit with magnitude >= 1 using exact decimal-exponent shifts.
struct Quantity {
  double magnitude = 0.0;
  Unit unit = Unit::dimensionless;

  double si() const { return magnitude * unit_scale(unit); }
  Quantity canonical() const;
  bool operator==(const Quantity& other) const;
};

struct SourcePos {
  int line = 1;
  int col = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, SourcePos pos, const std::string& message,
             std::vector<std::string> expected = {});
  SourcePos pos;
  std::vector<std::string> expected;  // non-empty for unexpected-token errors
};

/// A slot value: either a literal quantity or a sweep-variable reference.
struct Arg {
  std::optional<Quantity> value;
  std::string variable;  // set when value is empty

  bool is_variable() const { return !value.has_value(); }
  bool operator==(const Arg&) const;
};

enum class MwAngle { none, pi, half_pi };

struct LaserStmt {
  Arg duration;
  Arg power{Quantity{1.0, Unit::dimensionless}, {}};
  SourcePos pos;
  bool operator==(const LaserStmt&) const;
};
struct WaitStmt {
  Arg duration;
  SourcePos pos;
  bool operator==(const WaitStmt&) const;
};
struct MwStmt {
  MwAngle angle = MwAngle::none;
  Arg duration;  // empty for angle form until validation resolves it
  std::optional<Arg> frequency;
  Arg amplitude{Quantity{1.0, Unit::dimensionless}, {}};
  Arg phase{Quantity{0.0, Unit::dimensionless}, {}};
  SourcePos pos;
  bool operator==(const MwStmt&) const;
};
struct MeasureStmt {
  Arg window;
  SourcePos pos;
  bool operator==(const MeasureStmt&) const;
};
struct SweepStmt;

using Statement = std::variant<LaserStmt, WaitStmt, MwStmt, MeasureStmt, SweepStmt>;

struct SweepStmt {
  std::string variable;
  Quantity start;
  Quantity stop;
  int steps = 0;
  std::vector<Statement> body;
  SourcePos pos;
  bool operator==(const SweepStmt&) const;
};

struct PulseSequence {
  std::vector<Statement> statements;
  std::string source_file = "<input>";
  bool validated = false;

  bool operator==(const PulseSequence& other) const;
};

// ---- Tokenizer ----

struct Token {
  enum class Kind { ident, quantity, equals, dotdot, lbrace, rbrace, newline, eof };
  Kind kind = Kind::eof;
  std::string text;   // ident text
  Quantity quantity;  // for Kind::quantity
  SourcePos pos;
};

// Splits text into identifiers, unit-suffixed numbers, '=', '..', braces and
// newlines; '#' comments run to end of line. Throws ParseError on illegal input.
std::vector<Token> tokenize(const std::string& text, const std::string& file = "<input>");

// ---- Parser / validator / expander ----

PulseSequence parse(const std::vector<Token>& tokens, const std::string& file = "<input>");
PulseSequence parse_text(const std::string& text, const std::string& file = "<input>");

/// Validation context: transition frequencies available to mw statements and
/// an optional Rabi calibration for resolving angle-form pulses.
struct ValidationContext {
  std::vector<double> transition_freqs_ghz;
  std::optional<double> rabi_frequency_hz;
  double max_detuning_ghz = 2.0;
  double max_total_duration_s = 100.0;
};

// Checks sweep-variable binding and dimensions, resolves angle-form pulses to
// durations (t_pi = 1/(2 f_R)), checks mw frequencies against the available
// transitions and caps the total expanded duration. Returns a validated copy.
PulseSequence validate(const PulseSequence& seq, const ValidationContext& ctx);

// Cartesian expansion over sweep grids with linear spacing. Returns one
// concrete (sweep-free) sequence per grid point, plus the grid itself.
struct Expansion {
  std::vector<std::string> sweep_names;
  std::vector<std::vector<double>> sweep_values_si;  // per concrete sequence
  std::vector<PulseSequence> sequences;
};
Expansion expand(const PulseSequence& seq);

// Canonical text form; parse(serialize(s)) is structurally identical to s.
std::string serialize(const PulseSequence& seq);

}  // namespace spinterface::seqlang
