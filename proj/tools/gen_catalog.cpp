// Writes an emoji catalog TSV (sequence, name, terms) for every codepoint
// with the Emoji_Presentation property known to the linked ICU.
#include <cstdio>
#include <iostream>
#include <string>

#include <unicode/uchar.h>

int main(int argc, char**) {
  if (argc > 1) {
    std::cerr << "usage: gen_catalog > catalog.tsv\n";
    return 1;
  }
  std::cout << "# codepoints with Emoji_Presentation; generated from ICU " << U_UNICODE_VERSION << "\n";
  for (UChar32 c = 0; c <= 0x10FFFF; ++c) {
    if (!u_hasBinaryProperty(c, UCHAR_EMOJI_PRESENTATION)) continue;
    if (u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) || u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR)) continue;
    char name[256];
    UErrorCode status = U_ZERO_ERROR;
    const int32_t len = u_charName(c, U_UNICODE_CHAR_NAME, name, sizeof(name), &status);
    if (U_FAILURE(status) || len <= 0) continue;
    std::string lower(name, static_cast<std::size_t>(len));
    for (char& ch : lower) {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
      if (ch == '-') ch = ' ';
    }
    char hex[16];
    std::snprintf(hex, sizeof(hex), "%04X", static_cast<unsigned>(c));
    std::cout << hex << '\t' << lower << '\n';
  }
  return 0;
}
