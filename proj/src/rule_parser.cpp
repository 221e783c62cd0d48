#include "stratengine/rule.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>

namespace stratengine {

bool CategoricalLabels::superset_of(const CategoricalLabels &required) const {
  auto covers = [](const std::set<std::string> &have,
                   const std::set<std::string> &need) {
    return std::includes(have.begin(), have.end(), need.begin(), need.end());
  };
  return covers(reactions, required.reactions) && covers(fgs, required.fgs) &&
         covers(rings, required.rings);
}

const std::set<std::string> &CategoricalLabels::of(LabelKind kind) const {
  switch (kind) {
    case LabelKind::reaction: return reactions;
    case LabelKind::fg: return fgs;
    case LabelKind::ring: return rings;
  }
  return reactions;
}

std::set<std::string> &CategoricalLabels::of(LabelKind kind) {
  return const_cast<std::set<std::string> &>(
      static_cast<const CategoricalLabels *>(this)->of(kind));
}

namespace {

enum class Tok { ident, string, integer, lparen, rparen, comma, cmp, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  Lexer(std::string_view src, int line_offset)
      : src_(src), line_(1 + line_offset) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Tok::ident;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_')) {
        t.text += advance();
      }
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && pos_ + 1 < src_.size() &&
                std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      t.kind = Tok::integer;
      t.text += advance();
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        t.text += advance();
      }
    } else if (c == '"') {
      t.kind = Tok::string;
      advance();
      while (true) {
        if (pos_ >= src_.size() || src_[pos_] == '\n') {
          throw ParseError("unterminated string literal", t.line, t.column);
        }
        char ch = advance();
        if (ch == '"') break;
        if (ch == '\\') {
          if (pos_ >= src_.size()) {
            throw ParseError("unterminated string literal", t.line, t.column);
          }
          char esc = advance();
          if (esc != '"' && esc != '\\') {
            throw ParseError(std::string("unknown escape '\\") + esc + "'",
                             line_, column_ - 2);
          }
          t.text += esc;
        } else {
          t.text += ch;
        }
      }
    } else if (c == '(') {
      t.kind = Tok::lparen;
      t.text = advance();
    } else if (c == ')') {
      t.kind = Tok::rparen;
      t.text = advance();
    } else if (c == ',') {
      t.kind = Tok::comma;
      t.text = advance();
    } else if (c == '<' || c == '>' || c == '=' || c == '!') {
      t.kind = Tok::cmp;
      t.text += advance();
      if (pos_ < src_.size() && src_[pos_] == '=') t.text += advance();
      if (t.text == "=" || t.text == "!") {
        throw ParseError("unknown operator '" + t.text + "'", t.line, t.column);
      }
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", line_,
                       column_);
    }
    return t;
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_;
  int column_ = 1;
};

enum class Args {
  none,
  label,
  label_site,
  one,
  two,
  variadic,
  one_int,
};

struct Signature {
  RuleOp op;
  Args args;
  bool numeric = false;
  std::optional<LabelKind> label_kind = std::nullopt;
};

const std::map<std::string, Signature, std::less<>> &signatures() {
  static const std::map<std::string, Signature, std::less<>> table = {
      {"reaction", {RuleOp::reaction, Args::label, false, LabelKind::reaction}},
      {"fg_formed", {RuleOp::fg_formed, Args::label, false, LabelKind::fg}},
      {"fg_consumed", {RuleOp::fg_consumed, Args::label, false, LabelKind::fg}},
      {"fg_preserved",
       {RuleOp::fg_preserved, Args::label, false, LabelKind::fg}},
      {"ring_formed", {RuleOp::ring_formed, Args::label, false, LabelKind::ring}},
      {"ring_consumed",
       {RuleOp::ring_consumed, Args::label, false, LabelKind::ring}},
      {"ring_preserved",
       {RuleOp::ring_preserved, Args::label, false, LabelKind::ring}},
      {"ring_preserved_from_leaf",
       {RuleOp::ring_preserved_from_leaf, Args::label, false, LabelKind::ring}},
      {"mol_has_fg", {RuleOp::mol_has_fg, Args::label_site, false, LabelKind::fg}},
      {"mol_has_ring",
       {RuleOp::mol_has_ring, Args::label_site, false, LabelKind::ring}},
      {"convergent", {RuleOp::convergent, Args::none}},
      {"linear", {RuleOp::linear, Args::none}},
      {"all", {RuleOp::all, Args::variadic}},
      {"any", {RuleOp::any, Args::variadic}},
      {"not", {RuleOp::negate, Args::one}},
      {"before", {RuleOp::before, Args::two}},
      {"before_any", {RuleOp::before_any, Args::two}},
      {"within_depth", {RuleOp::within_depth, Args::one_int}},
      {"at_final_step", {RuleOp::at_final_step, Args::one}},
      {"count", {RuleOp::count, Args::one, true}},
      {"depth_of", {RuleOp::depth_of, Args::one, true}},
      {"max_depth", {RuleOp::max_depth, Args::none, true}},
      {"steps", {RuleOp::steps, Args::none, true}},
  };
  return table;
}

std::string_view op_name(RuleOp op) {
  for (const auto &[name, sig] : signatures()) {
    if (sig.op == op) return name;
  }
  return "?";
}

bool requires_reaction_args(RuleOp op) {
  switch (op) {
    case RuleOp::before:
    case RuleOp::before_any:
    case RuleOp::within_depth:
    case RuleOp::at_final_step:
    case RuleOp::count:
    case RuleOp::depth_of:
      return true;
    default:
      return false;
  }
}

bool is_numeric(const RuleExpr &e) {
  switch (e.op) {
    case RuleOp::literal:
    case RuleOp::count:
    case RuleOp::depth_of:
    case RuleOp::max_depth:
    case RuleOp::steps:
      return true;
    default:
      return false;
  }
}

// First node that cannot be evaluated at a single reaction.
const RuleExpr *first_route_level(const RuleExpr &e) {
  switch (e.op) {
    case RuleOp::reaction:
    case RuleOp::fg_formed:
    case RuleOp::fg_consumed:
    case RuleOp::fg_preserved:
    case RuleOp::ring_formed:
    case RuleOp::ring_consumed:
    case RuleOp::ring_preserved:
      return nullptr;
    case RuleOp::all:
    case RuleOp::any:
    case RuleOp::negate:
      for (const auto &a : e.args) {
        if (const auto *bad = first_route_level(*a)) return bad;
      }
      return nullptr;
    default:
      return &e;
  }
}

class Parser {
 public:
  Parser(std::string_view src, const Vocabularies *vocab, int line_offset)
      : lex_(src, line_offset), vocab_(vocab) {
    cur_ = lex_.next();
  }

  RuleExprPtr parse_all() {
    if (cur_.kind == Tok::end) {
      throw ParseError("empty rule expression", cur_.line, cur_.column);
    }
    auto e = parse_expr();
    if (cur_.kind != Tok::end) {
      throw ParseError("unexpected '" + cur_.text + "' after expression",
                       cur_.line, cur_.column);
    }
    return e;
  }

 private:
  Token take() {
    Token t = cur_;
    cur_ = lex_.next();
    return t;
  }

  Token expect(Tok kind, const char *what) {
    if (cur_.kind != kind) {
      std::string got = cur_.kind == Tok::end ? "end of input"
                                              : "'" + cur_.text + "'";
      throw ParseError(std::string("expected ") + what + ", got " + got,
                       cur_.line, cur_.column);
    }
    return take();
  }

  RuleExprPtr parse_expr() {
    auto lhs = parse_term();
    if (cur_.kind == Tok::cmp) {
      Token op = take();
      auto rhs = parse_term();
      if (!is_numeric(*lhs) || !is_numeric(*rhs)) {
        throw ParseError("comparison '" + op.text + "' needs numeric operands",
                         op.line, op.column);
      }
      auto e = std::make_shared<RuleExpr>();
      e->op = RuleOp::compare;
      e->line = lhs->line;
      e->column = lhs->column;
      e->comparison = op.text == "<"    ? Comparison::lt
                      : op.text == "<=" ? Comparison::le
                      : op.text == ">"  ? Comparison::gt
                      : op.text == ">=" ? Comparison::ge
                      : op.text == "==" ? Comparison::eq
                                        : Comparison::ne;
      e->args = {lhs, rhs};
      return e;
    }
    if (is_numeric(*lhs)) {
      throw ParseError("numeric term used as a predicate (compare it)",
                       lhs->line, lhs->column);
    }
    return lhs;
  }

  RuleExprPtr parse_term() {
    if (cur_.kind == Tok::integer) {
      Token t = take();
      auto e = std::make_shared<RuleExpr>();
      e->op = RuleOp::literal;
      e->number = std::stoi(t.text);
      e->line = t.line;
      e->column = t.column;
      return e;
    }
    Token name = expect(Tok::ident, "predicate name");
    auto it = signatures().find(name.text);
    if (it == signatures().end()) {
      throw ParseError("unknown predicate '" + name.text + "'", name.line,
                       name.column);
    }
    const Signature &sig = it->second;
    auto e = std::make_shared<RuleExpr>();
    e->op = sig.op;
    e->line = name.line;
    e->column = name.column;
    expect(Tok::lparen, "'('");

    switch (sig.args) {
      case Args::none:
        break;
      case Args::label:
      case Args::label_site: {
        Token label = expect(Tok::string, "quoted label");
        check_label(*sig.label_kind, label);
        e->label = label.text;
        if (sig.args == Args::label_site) {
          expect(Tok::comma, "','");
          Token site = cur_;
          if (cur_.kind != Tok::ident && cur_.kind != Tok::string) {
            throw ParseError("expected root|leaf|any", cur_.line, cur_.column);
          }
          take();
          if (site.text == "root") e->site = MoleculeSite::root;
          else if (site.text == "leaf") e->site = MoleculeSite::leaf;
          else if (site.text == "any") e->site = MoleculeSite::any;
          else
            throw ParseError("expected root|leaf|any, got '" + site.text + "'",
                             site.line, site.column);
        }
        break;
      }
      case Args::one:
        e->args.push_back(parse_expr());
        break;
      case Args::two:
        e->args.push_back(parse_expr());
        expect(Tok::comma, "','");
        e->args.push_back(parse_expr());
        break;
      case Args::one_int: {
        e->args.push_back(parse_expr());
        expect(Tok::comma, "','");
        Token n = expect(Tok::integer, "integer depth");
        e->number = std::stoi(n.text);
        break;
      }
      case Args::variadic:
        if (cur_.kind != Tok::rparen) {
          e->args.push_back(parse_expr());
          while (cur_.kind == Tok::comma) {
            take();
            e->args.push_back(parse_expr());
          }
        }
        break;
    }
    expect(Tok::rparen, "')'");

    if (requires_reaction_args(e->op)) {
      for (const auto &a : e->args) {
        if (const auto *bad = first_route_level(*a)) {
          throw ParseError("'" + std::string(op_name(bad->op)) +
                               "' is route-level and cannot be used inside '" +
                               name.text + "'",
                           bad->line, bad->column);
        }
      }
    }
    return e;
  }

  void check_label(LabelKind kind, const Token &label) {
    if (label.text.empty()) {
      throw ParseError("empty label", label.line, label.column);
    }
    if (vocab_ && !vocab_->contains(kind, label.text)) {
      throw ParseError("unknown " + std::string(to_string(kind)) + " label '" +
                           label.text + "'",
                       label.line, label.column);
    }
  }

  Lexer lex_;
  const Vocabularies *vocab_;
  Token cur_;
};

void print(const RuleExpr &e, std::string &out) {
  auto quote = [&](const std::string &s) {
    out += '"';
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += '"';
  };
  switch (e.op) {
    case RuleOp::literal:
      out += std::to_string(e.number);
      return;
    case RuleOp::compare: {
      static const char *ops[] = {"<", "<=", ">", ">=", "==", "!="};
      print(*e.args[0], out);
      out += ' ';
      out += ops[static_cast<int>(e.comparison)];
      out += ' ';
      print(*e.args[1], out);
      return;
    }
    default:
      break;
  }
  out += op_name(e.op);
  out += '(';
  if (!e.label.empty()) {
    quote(e.label);
    if (e.op == RuleOp::mol_has_fg || e.op == RuleOp::mol_has_ring) {
      out += e.site == MoleculeSite::root   ? ", root"
             : e.site == MoleculeSite::leaf ? ", leaf"
                                            : ", any";
    }
  }
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    if (i) out += ", ";
    print(*e.args[i], out);
  }
  if (e.op == RuleOp::within_depth) out += ", " + std::to_string(e.number);
  out += ')';
}

void collect(const RuleExpr &e, CategoricalLabels &labels) {
  switch (e.op) {
    case RuleOp::reaction:
      labels.reactions.insert(e.label);
      break;
    case RuleOp::fg_formed:
    case RuleOp::fg_consumed:
    case RuleOp::fg_preserved:
    case RuleOp::mol_has_fg:
      labels.fgs.insert(e.label);
      break;
    case RuleOp::ring_formed:
    case RuleOp::ring_consumed:
    case RuleOp::ring_preserved:
    case RuleOp::ring_preserved_from_leaf:
    case RuleOp::mol_has_ring:
      labels.rings.insert(e.label);
      break;
    default:
      break;
  }
  for (const auto &a : e.args) collect(*a, labels);
}

}  // namespace

bool is_reaction_level(const RuleExpr &expr) {
  return first_route_level(expr) == nullptr;
}

RuleExprPtr parse_expression(std::string_view text, const Vocabularies *vocab,
                             int line_offset) {
  return Parser(text, vocab, line_offset).parse_all();
}

std::string to_string(const RuleExprPtr &expr) {
  std::string out;
  if (expr) print(*expr, out);
  return out;
}

CategoricalLabels collect_labels(const RuleExprPtr &expr) {
  CategoricalLabels labels;
  if (expr) collect(*expr, labels);
  return labels;
}

StrategyRule make_rule(std::string rule_id, std::string description,
                       std::string_view expression, const Vocabularies *vocab) {
  static const std::regex id_pattern("[A-Za-z0-9_.:-]+");
  if (!std::regex_match(rule_id, id_pattern)) {
    throw Error("invalid rule id '" + rule_id +
                "' (allowed: letters, digits, _ . : -)");
  }
  StrategyRule rule;
  rule.rule_id = std::move(rule_id);
  rule.description = std::move(description);
  rule.ast = parse_expression(expression, vocab);
  rule.categorical_meta = collect_labels(rule.ast);
  return rule;
}

StrategyRule parse_rule(std::string_view text, const Vocabularies *vocab) {
  std::optional<std::string> id;
  std::string description;
  int line_no = 0;
  std::size_t pos = 0;
  bool separator = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos
                                     ? std::string_view::npos
                                     : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    auto t = trim(line);
    if (t == "---") {
      separator = true;
      break;
    }
    if (t.empty() || t.front() == '#') continue;
    auto colon = t.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError("expected 'key: value' front matter", line_no, 1);
    }
    auto key = trim(t.substr(0, colon));
    auto value = std::string(trim(t.substr(colon + 1)));
    if (key == "id") {
      id = value;
    } else if (key == "description") {
      description = value;
    } else {
      throw ParseError("unknown front matter key '" + std::string(key) + "'",
                       line_no, 1);
    }
  }
  if (!separator) throw ParseError("missing '---' after front matter", 1, 1);
  if (!id || id->empty()) throw ParseError("missing 'id:' front matter", 1, 1);

  static const std::regex id_pattern("[A-Za-z0-9_.:-]+");
  if (!std::regex_match(*id, id_pattern)) {
    throw Error("invalid rule id '" + *id + "'");
  }
  StrategyRule rule;
  rule.rule_id = *id;
  rule.description = description;
  rule.ast = parse_expression(text.substr(pos), vocab, line_no);
  rule.categorical_meta = collect_labels(rule.ast);
  return rule;
}

std::string format_rule(const StrategyRule &rule) {
  return "id: " + rule.rule_id + "\ndescription: " + rule.description +
         "\n---\n" + rule.expression() + "\n";
}

}  // namespace stratengine
