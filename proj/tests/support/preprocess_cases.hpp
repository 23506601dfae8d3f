#pragma once

#include <string_view>
#include <vector>

namespace testsupport {

struct PreprocessCase {
  std::string_view raw;
  std::string_view rendered;  // empty: EmptyQuery expected
};

// Each expectation was derived by hand from the rules: lowercase ASCII, blank
// out ASCII punctuation except '-' and '/' between two letters/digits, split on
// whitespace, drop {a, an, and, by, for, in, of, or, the, to, with}, drop
// repeats.
inline const std::vector<PreprocessCase>& preprocess_cases() {
  static const std::vector<PreprocessCase> cases = {
      {"paracetamol and caffeine", "paracetamol | caffeine"},
      {"Omega-3 (fish oil)", "omega-3 | fish | oil"},
      {"acetaminophen/codeine", "acetaminophen/codeine"},
      {"Tylenol, Extra Strength!", "tylenol | extra | strength"},
      {"THE Aspirin", "aspirin"},
      {"aspirin aspirin ASPIRIN", "aspirin"},
      {"vitamin B12 - 1000mcg", "vitamin | b12 | 1000mcg"},
      {"-leading and trailing-", "leading | trailing"},
      {"co-codamol 30/500", "co-codamol | 30/500"},
      {"hydrocortisone 1% cream", "hydrocortisone | 1 | cream"},
      {"St. John's Wort", "st | john | s | wort"},
      {"insulin (human) [rDNA]", "insulin | human | rdna"},
      {"a/b", "a/b"},
      {"salt & pepper", "salt | pepper"},
      {"drug_name_x", "drug | name | x"},
      {"for the pain of an injury", "pain | injury"},
      {"Iron--sulfate", "iron | sulfate"},
      {"ibuprofen/", "ibuprofen"},
      {"\"Naproxen\"; 'Aleve'", "naproxen | aleve"},
      {"Betnovate Scalp Application", "betnovate | scalp | application"},
      {"Cod Liver Oil, with Vitamin D", "cod | liver | oil | vitamin | d"},
      {"tab\tlet\nform", "tab | let | form"},
      {"100 mg / 5 ml", "100 | mg | 5 | ml"},
      {"and the of", ""},
      {"and,or;the...", ""},
      {"   ", ""},
  };
  return cases;
}

}  // namespace testsupport
