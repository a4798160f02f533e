#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "autoopt/latex.hpp"
#include "autoopt/script.hpp"

using namespace autoopt;

namespace {

std::string readFile(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ModelIR smallModel() {
  ModelIR m;
  m.sense = Sense::Maximize;
  m.variables = {{"a", 0.0, kInf, Domain::Continuous, FamilyRole::Scalar},
                 {"b", -2.0, 3.5, Domain::Integer, FamilyRole::Scalar},
                 {"c", -kInf, kInf, Domain::Continuous, FamilyRole::Scalar},
                 {"d", 1.0, kInf, Domain::Continuous, FamilyRole::Scalar},
                 {"e", -kInf, 4.0, Domain::Continuous, FamilyRole::Scalar},
                 {"f", 0.0, 1.0, Domain::Binary, FamilyRole::Scalar}};
  Expr a = Expr::variable(0), b = Expr::variable(1), c = Expr::variable(2);
  m.objective = pow(a, 2.0) - 3.0 * b / (c + 1.0);
  m.constraints.push_back(makeConstraint(a + b - 7.0, WrittenRelation::LessEqual, Expr::constant(0.0), Quantifier::None));
  m.constraints.push_back(makeConstraint(exp(c), WrittenRelation::GreaterEqual, a * b, Quantifier::None));
  m.constraints.push_back(makeConstraint(a - c, WrittenRelation::Equal, Expr::constant(2.0), Quantifier::None));
  return m;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(EmitScript, VariableDeclarations) {
  auto l = lines(emitScript(smallModel()));
  ASSERT_GE(l.size(), 6u);
  EXPECT_EQ(l[0], "model.a = Var(within=NonNegativeReals)");
  EXPECT_EQ(l[1], "model.b = Var(bounds=(-2,3.5), domain=Integers)");
  EXPECT_EQ(l[2], "model.c = Var()");
  EXPECT_EQ(l[3], "model.d = Var(bounds=(1,None))");
  EXPECT_EQ(l[4], "model.e = Var(bounds=(None,4))");
  EXPECT_EQ(l[5], "model.f = Var(domain=Binary)");
}

TEST(EmitScript, ObjectiveAndConstraints) {
  auto l = lines(emitScript(smallModel()));
  ASSERT_EQ(l.size(), 12u);
  EXPECT_EQ(l[6], "def objective_function(model):");
  EXPECT_EQ(l[7], "    return a**2 - (3*b)/(c + 1)");
  EXPECT_EQ(l[8], "model.obj = Objective(rule=objective_function, sense=maximize)");
  EXPECT_EQ(l[9], "model.Constraint1 = Constraint(expr = a + b <= 7)");
  EXPECT_EQ(l[10], "model.Constraint2 = Constraint(expr = exp(c) >= a*b)");
  EXPECT_EQ(l[11], "model.Constraint3 = Constraint(expr = a - c == 2)");
}

TEST(EmitScript, ExpressionsReadBackToSameValues) {
  auto m = smallModel();
  auto resolve = [&m](const std::string& id) -> std::optional<Expr> {
    if (auto i = m.find(id)) return Expr::variable(*i);
    return std::nullopt;
  };
  std::vector<double> x{1.5, 2.0, 0.25, 3.0, -1.0, 1.0};
  std::smatch sm;
  for (const auto& l : lines(emitScript(m))) {
    if (std::regex_search(l, sm, std::regex(R"(^    return (.*)$)"))) {
      Expr back = ExprReader(sm[1].str(), resolve).parse({false, false});
      EXPECT_DOUBLE_EQ(evaluate(back, x), evaluate(m.objective, x));
    }
  }
}

TEST(EmitScript, RejectsUnexpandedFamilies) {
  auto m = parseModel(R"(\min \sum_{p=1}^{P} y_p^2 \\ \text{s.t.} \; y_p^2 \leq 1, \forall p)", {2, 0, ""}).model;
  EXPECT_THROW(emitScript(m), EmitError);
  auto text = emitScript(expandModel(m));
  EXPECT_NE(text.find("return y1**2 + y2**2"), std::string::npos);
  EXPECT_NE(text.find("model.Constraint2 = Constraint(expr = y2**2 <= 1)"), std::string::npos);
}

TEST(EmitExpression, DefaultNames) {
  EXPECT_EQ(emitExpression(sin(Expr::variable(0)) * pow(Expr::variable(2), -1.0)), "sin(x1)*x3**(-1)");
}

TEST(NormalizeScript, EscapedBreaksAndWrapping) {
  std::string label = "model.x = Var(within=PositiveReals)\\ndef obj_rule(model):\\n return 2 * \nx\\\\nmodel.OF = "
                      "Objective(rule=obj_rule,\nsense=minimize)";
  auto n = normalizeScript(label);
  ASSERT_EQ(n.size(), 4u);
  EXPECT_EQ(n[0], "model.x=Var(within=NonNegativeReals)");
  EXPECT_EQ(n[1], "def objective_function(model):");
  EXPECT_EQ(n[2], "return 2*x");
  EXPECT_EQ(n[3], "model.obj=Objective(rule=objective_function,sense=minimize)");
}

TEST(NormalizeScript, PhysicalLinesWhenNoEscapes) {
  auto n = normalizeScript("model.a = Var()\n\n  model.b  =  Var()\n");
  ASSERT_EQ(n.size(), 2u);
  EXPECT_EQ(n[1], "model.b=Var()");
}

TEST(NormalizeScript, TableFiveLabelsMatchEmission) {
  for (const char* row : {"table5_row1", "table5_row2", "table5_row3"}) {
    SCOPED_TRACE(row);
    std::filesystem::path dir(AUTOOPT_FIXTURE_DIR);
    auto m = parseModel(readFile(dir / (std::string(row) + ".tex"))).model;
    EXPECT_EQ(normalizeScript(emitScript(expandModel(m))), normalizeScript(readFile(dir / (std::string(row) + ".pyomo"))));
  }
}
