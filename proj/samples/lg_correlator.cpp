// Genus-g correlators of a few Landau-Ginzburg superpotentials, with Milnor numbers.
#include <iostream>

#include "bvlab/residue.hpp"

int main()
{
  using namespace bvlab;
  struct Case {
    std::vector<std::string> vars;
    std::string w;
  };
  const Case cases[] = {{{"z"}, "z^3/3"}, {{"z"}, "z^5/5"}, {{"x", "y"}, "x^3/3 + y^3/3"}, {{"x", "y"}, "x^2*y + y^4"}};
  for (const auto& c : cases) {
    MPoly W = parse_poly(c.w, c.vars);
    ResidueFunctional R = build_residue(W);
    std::cout << "W = " << to_string(W, c.vars) << "  mu = " << R.jacobian.milnor << '\n';
    for (int g = 0; g <= 3; ++g) {
      Correlator k = vafa_correlator(R, {}, g);
      std::cout << "  g = " << g << "  <1> = " << to_string(k.value) << '\n';
    }
  }
}
