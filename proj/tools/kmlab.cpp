// Command-line entry point: fragment/measure loading, subcommand dispatch,
// exact-rational table output.  Values print as "p/q" ("n" for integers);
// JSON mode nests {label, num, den}.  Exit codes: 0 success or verdict pass,
// 1 verdict fail, 2 usage or input error.

#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kmlab/io.hpp"
#include "kmlab/qe.hpp"

using namespace kmlab;
using nlohmann::json;

namespace {

struct Output {
  std::string format = "tsv";
  std::vector<std::pair<std::string, Rat>> rows;
  std::vector<std::pair<std::string, std::string>> texts;

  void add(const std::string& label, const Rat& v) { rows.push_back({label, v}); }
  void text(const std::string& label, const std::string& v) {
    texts.push_back({label, v});
  }
  void flush() const {
    if (format == "tsv" && rows.size() == 1 && texts.empty()) {
      std::cout << rat_str(rows[0].second) << "\n";
      return;
    }
    if (format == "json") {
      json arr = json::array();
      for (const auto& [l, v] : rows)
        arr.push_back({{"label", l},
                       {"num", v.get_num().get_str()},
                       {"den", v.get_den().get_str()}});
      for (const auto& [l, s] : texts)
        arr.push_back({{"label", l}, {"text", s}});
      std::cout << arr.dump() << "\n";
    } else {
      for (const auto& [l, v] : rows)
        std::cout << l << "\t" << rat_str(v) << "\n";
      for (const auto& [l, s] : texts) std::cout << l << "\t" << s << "\n";
    }
  }
};

Fragment make_fragment(const std::string& file, const std::string& theory) {
  if (!file.empty()) return load_fragment(file);
  Fragment frag;
  auto t = theory_from_name(theory);
  if (!t) throw std::invalid_argument("unknown theory: " + theory);
  frag.theory = *t;
  return frag;
}

std::map<std::string, Sort> param_sorts(const Fragment& frag) {
  std::map<std::string, Sort> out;
  for (const auto& [n, s] : frag.params) out[n] = s;
  return out;
}

std::vector<FormulaPtr> parse_pool(const std::vector<std::string>& srcs,
                                   const Fragment& frag) {
  std::vector<FormulaPtr> out;
  for (const auto& s : srcs) out.push_back(parse_formula(s, param_sorts(frag)));
  return out;
}

// Formulas may name vertex elements the fragment does not declare; such
// names become vertex parameters (they denote themselves in relational
// theories).  Object variables of the measures stay variables.
std::vector<FormulaPtr> parse_pool_promoting(
    const std::vector<std::string>& srcs, Fragment& frag,
    const std::set<std::string>& object_vars) {
  for (const auto& s : srcs) {
    FormulaPtr f = parse_formula(s, param_sorts(frag));
    for (const auto& [n, so] : free_vars(f))
      if (so == Sort::V && !object_vars.count(n) && !frag.params.count(n))
        frag.add_param(n, Sort::V);
  }
  return parse_pool(srcs, frag);
}

// key=value positionals of the `bounds` subcommand.
std::map<std::string, Rat> parse_kv_rats(const std::vector<std::string>& kvs) {
  std::map<std::string, Rat> out;
  for (const auto& kv : kvs) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key=value, got: " + kv);
    auto r = parse_rat(kv.substr(eq + 1));
    if (!r) throw std::invalid_argument("bad rational in " + kv);
    out[kv.substr(0, eq)] = *r;
  }
  return out;
}

int report_rows(Output& out, const Report& rep, const std::string& what) {
  if (rep.equal) {
    out.text("verdict", "equal");
    out.flush();
    return 0;
  }
  out.text("verdict", "counterexample");
  out.text("formula", formula_str(rep.formula));
  out.add(what + "_left", rep.left);
  out.add(what + "_right", rep.right);
  out.flush();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact-arithmetic laboratory for measures over fragments"};
  app.require_subcommand(1);

  std::string fragment_file, theory = "tr", format = "tsv";
  app.add_option("--fragment", fragment_file, "fragment file path");
  app.add_option("--theory", theory,
                 "theory for an empty fragment (when no --fragment)");
  app.add_option("--format", format, "output format: tsv or json")
      ->check(CLI::IsMember({"tsv", "json"}));

  // eval
  auto* c_eval = app.add_subcommand("eval", "evaluate a measure on a formula");
  std::string ev_measure;
  std::vector<std::string> ev_formulas;
  c_eval->add_option("--measure", ev_measure, "measure spec")->required();
  c_eval->add_option("formula", ev_formulas, "qf formulas")->required();

  // product
  auto* c_prod = app.add_subcommand("product", "Morley product value");
  std::string pr_left, pr_right;
  std::vector<std::string> pr_formulas;
  c_prod->add_option("--left", pr_left, "left measure spec")->required();
  c_prod->add_option("--right", pr_right, "right measure spec")->required();
  c_prod->add_option("formula", pr_formulas, "qf formulas")->required();

  // power
  auto* c_pow = app.add_subcommand("power", "Morley power value");
  std::string pw_measure;
  std::size_t pw_n = 2;
  std::vector<std::string> pw_formulas;
  c_pow->add_option("--measure", pw_measure, "measure spec")->required();
  c_pow->add_option("--n", pw_n, "power")->required();
  c_pow->add_option("formula", pw_formulas, "qf formulas")->required();

  // commute
  auto* c_com = app.add_subcommand("commute", "compare both product orders");
  std::string cm_left, cm_right;
  std::vector<std::string> cm_formulas;
  c_com->add_option("--left", cm_left, "first measure spec")->required();
  c_com->add_option("--right", cm_right, "second measure spec")->required();
  c_com->add_option("formula", cm_formulas, "formula pool")->required();

  // assoc
  auto* c_asc = app.add_subcommand("assoc", "compare both bracketings");
  std::string as_mu, as_nu, as_lam;
  std::vector<std::string> as_formulas;
  c_asc->add_option("--mu", as_mu, "outer measure spec")->required();
  c_asc->add_option("--nu", as_nu, "middle measure spec")->required();
  c_asc->add_option("--lam", as_lam, "inner measure spec")->required();
  c_asc->add_option("formula", as_formulas, "formula pool")->required();

  // fam-search
  auto* c_fam = app.add_subcommand("fam-search", "search for an Av tuple");
  std::string fs_measure, fs_eps = "1/4", fs_formula;
  std::size_t fs_nmax = 4;
  c_fam->add_option("--measure", fs_measure, "measure spec")->required();
  c_fam->add_option("--eps", fs_eps, "threshold p/q");
  c_fam->add_option("--n-max", fs_nmax, "largest tuple length");
  c_fam->add_option("formula", fs_formula, "qf formula")->required();

  // bounds
  auto* c_bnd = app.add_subcommand("bounds", "concentration bounds");
  bool bd_binomial = false, bd_wlln = false;
  std::vector<std::string> bd_kvs;
  c_bnd->add_flag("--binomial", bd_binomial, "exact binomial tail");
  c_bnd->add_flag("--wlln", bd_wlln, "Chebyshev-style lower bound");
  c_bnd->add_option("args", bd_kvs, "r=p/q eps=p/q n=N");

  // fim-convexity
  auto* c_fim = app.add_subcommand("fim-convexity",
                                   "convex-combination power identity");
  std::string fc_mu, fc_nu, fc_r = "1/2";
  std::size_t fc_n = 2;
  std::vector<std::string> fc_formulas;
  c_fim->add_option("--mu", fc_mu, "first measure spec")->required();
  c_fim->add_option("--nu", fc_nu, "second measure spec")->required();
  c_fim->add_option("--r", fc_r, "weight p/q");
  c_fim->add_option("--n", fc_n, "power");
  c_fim->add_option("formula", fc_formulas, "formula pool")->required();

  // qe
  auto* c_qe = app.add_subcommand("qe", "eliminate quantifiers");
  std::string qe_formula;
  c_qe->add_option("formula", qe_formula, "formula")->required();

  // types
  auto* c_typ = app.add_subcommand("types", "enumerate complete types");
  std::vector<std::string> ty_vars{"x:V"};
  bool ty_list = false;
  std::size_t ty_cap = 1u << 22;
  c_typ->add_option("--var", ty_vars, "variable as name:sort");
  c_typ->add_flag("--list", ty_list, "print each type");
  c_typ->add_option("--cap", ty_cap, "type-space size cap (default 2^22)");

  // scenario
  auto* c_sc = app.add_subcommand("scenario", "run a named scenario");
  std::string sc_name, sc_file;
  std::vector<std::string> sc_params;
  c_sc->add_option("name", sc_name, "scenario name");
  c_sc->add_option("--file", sc_file, "scenario file");
  c_sc->add_option("--param", sc_params, "key=value override");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Fragment frag = make_fragment(fragment_file, theory);
    Output out;
    out.format = format;

    if (*c_eval) {
      auto mu = parse_measure_spec(ev_measure, frag);
      for (const auto& phi : parse_pool_promoting(ev_formulas, frag, {mu->var}))
        out.add(formula_str(phi), eval_measure(*mu, phi, frag));
      out.flush();
      return 0;
    }
    if (*c_prod) {
      auto l = parse_measure_spec(pr_left, frag);
      auto r = parse_measure_spec(pr_right, frag);
      for (const auto& phi :
           parse_pool_promoting(pr_formulas, frag, {l->var, r->var}))
        out.add(formula_str(phi), morley_product_eval(*l, *r, phi, frag));
      out.flush();
      return 0;
    }
    if (*c_pow) {
      auto mu = parse_measure_spec(pw_measure, frag);
      auto pvs = power_vars(pw_n);
      std::set<std::string> pvset(pvs.begin(), pvs.end());
      for (const auto& phi : parse_pool_promoting(pw_formulas, frag, pvset))
        out.add(formula_str(phi), power_eval(mu, pw_n, phi, frag));
      out.flush();
      return 0;
    }
    if (*c_com) {
      auto l = parse_measure_spec(cm_left, frag);
      auto r = parse_measure_spec(cm_right, frag);
      auto rep = check_commute(
          *l, *r, frag,
          parse_pool_promoting(cm_formulas, frag, {l->var, r->var}));
      return report_rows(out, rep, "order");
    }
    if (*c_asc) {
      auto mu = parse_measure_spec(as_mu, frag);
      auto nu = parse_measure_spec(as_nu, frag);
      auto lam = parse_measure_spec(as_lam, frag);
      auto rep = check_assoc(
          *mu, *nu, *lam, frag,
          parse_pool_promoting(as_formulas, frag,
                               {mu->var, nu->var, lam->var}));
      return report_rows(out, rep, "bracketing");
    }
    if (*c_fam) {
      auto mu = parse_measure_spec(fs_measure, frag);
      auto eps = parse_rat(fs_eps);
      if (!eps) throw std::invalid_argument("bad --eps rational");
      FormulaPtr phi = parse_formula(fs_formula, param_sorts(frag));
      auto res = fam_search(*mu, phi, *eps, frag, fs_nmax);
      out.text("found", res.found ? "yes" : "no");
      if (res.found) {
        std::string tup;
        for (const auto& n : res.tuple) tup += (tup.empty() ? "" : ",") + n;
        out.text("tuple", tup);
        out.add("error", res.error);
      }
      out.flush();
      return res.found ? 0 : 1;
    }
    if (*c_bnd) {
      auto kv = parse_kv_rats(bd_kvs);
      if (!kv.count("r") || !kv.count("eps") || !kv.count("n"))
        throw std::invalid_argument("bounds needs r=, eps=, n=");
      long n = (long)mpz_class(kv["n"].get_num()).get_si();
      if (kv["n"].get_den() != 1 || n < 1)
        throw std::invalid_argument("bounds: n must be a positive integer");
      if (!bd_binomial && !bd_wlln) bd_binomial = true;
      if (bd_binomial)
        out.add("binomial", binomial_tail_exact(kv["r"], kv["eps"], n));
      if (bd_wlln) out.add("wlln", wlln_bound(kv["r"], kv["eps"], n));
      out.flush();
      return 0;
    }
    if (*c_fim) {
      auto mu = parse_measure_spec(fc_mu, frag);
      auto nu = parse_measure_spec(fc_nu, frag);
      auto r = parse_rat(fc_r);
      if (!r) throw std::invalid_argument("bad --r rational");
      auto fvs = power_vars(fc_n);
      std::set<std::string> fvset(fvs.begin(), fvs.end());
      auto rep = fim_convexity_check(
          mu, nu, *r, fc_n, frag,
          parse_pool_promoting(fc_formulas, frag, fvset));
      return report_rows(out, rep, "convexity");
    }
    if (*c_qe) {
      FormulaPtr f = parse_formula(qe_formula, param_sorts(frag));
      std::cout << formula_str(eliminate_quantifiers(f, frag.theory)) << "\n";
      return 0;
    }
    if (*c_typ) {
      std::vector<std::pair<std::string, Sort>> vars;
      for (const auto& v : ty_vars) {
        std::size_t c = v.find(':');
        auto s = c == std::string::npos
                     ? std::optional<Sort>{Sort::V}
                     : sort_from_name(v.substr(c + 1));
        if (!s) throw std::invalid_argument("bad --var sort in " + v);
        vars.push_back({v.substr(0, c), *s});
      }
      auto space = enumerate_types(frag, vars, ty_cap);
      out.add("types", Rat((long)space.types.size()));
      out.flush();
      if (ty_list)
        for (const auto& t : space.types)
          std::cout << formula_str(t.formula()) << "\n";
      return 0;
    }
    if (*c_sc) {
      std::map<std::string, std::string> params;
      std::string name = sc_name;
      if (!sc_file.empty()) {
        auto spec = load_scenario(sc_file);
        if (name.empty()) name = spec.name;
        params = spec.params;
      }
      if (name.empty())
        throw std::invalid_argument("scenario: name or --file required");
      for (const auto& kv : sc_params) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("--param expects key=value: " + kv);
        params[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      auto res = run_scenario(name, params);
      for (const auto& [k, v] : res.parameters) out.text("param:" + k, v);
      for (const auto& [l, v] : res.rows) out.add(l, v);
      for (const auto& n : res.notes) out.text("note", n);
      out.text("verdict", res.pass ? "pass" : "fail");
      out.flush();
      return res.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
