#pragma once

#include <array>
#include <cstdint>

namespace diffstr {

// 10x11 monochrome glyph bitmaps for ASCII 33..126, baked from a fixed
// reference bitmap font. Row bit i is pixel column i (LSB = leftmost).
inline constexpr int kGlyphWidth = 10;
inline constexpr int kGlyphHeight = 11;
inline constexpr int kGlyphFirstCodepoint = 33;
inline constexpr int kGlyphCount = 94;

inline constexpr std::array<std::array<std::uint16_t, 11>, 94> kGlyphBits = {{
    {{0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x002, 0x000, 0x000}},  // '!'
    {{0x000, 0x006, 0x006, 0x006, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},  // '"'
    {{0x000, 0x010, 0x004, 0x004, 0x01e, 0x008, 0x01e, 0x00a, 0x002, 0x000, 0x000}},  // '#'
    {{0x000, 0x008, 0x02a, 0x00a, 0x00e, 0x018, 0x028, 0x02a, 0x01c, 0x008, 0x000}},  // '$'
    {{0x000, 0x022, 0x005, 0x015, 0x00a, 0x028, 0x054, 0x050, 0x022, 0x000, 0x000}},  // '%'
    {{0x000, 0x01c, 0x002, 0x022, 0x07c, 0x022, 0x022, 0x022, 0x03c, 0x000, 0x000}},  // '&'
    {{0x000, 0x001, 0x001, 0x001, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},  // '''
    {{0x000, 0x004, 0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x004, 0x004, 0x000}},  // '('
    {{0x000, 0x001, 0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x001, 0x001, 0x000}},  // ')'
    {{0x000, 0x000, 0x000, 0x000, 0x008, 0x008, 0x008, 0x014, 0x000, 0x000, 0x000}},  // '*'
    {{0x000, 0x000, 0x000, 0x008, 0x008, 0x03e, 0x008, 0x008, 0x000, 0x000, 0x000}},  // '+'
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x001, 0x000, 0x000}},  // ','
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x003, 0x000, 0x000, 0x000, 0x000, 0x000}},  // '-'
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x001, 0x000, 0x000}},  // '.'
    {{0x000, 0x004, 0x004, 0x000, 0x002, 0x002, 0x000, 0x000, 0x001, 0x000, 0x000}},  // '/'
    {{0x000, 0x00e, 0x011, 0x011, 0x011, 0x011, 0x011, 0x011, 0x00e, 0x000, 0x000}},  // '0'
    {{0x000, 0x00c, 0x00a, 0x008, 0x008, 0x008, 0x008, 0x008, 0x008, 0x000, 0x000}},  // '1'
    {{0x000, 0x00c, 0x012, 0x010, 0x010, 0x008, 0x004, 0x002, 0x01e, 0x000, 0x000}},  // '2'
    {{0x000, 0x00e, 0x010, 0x010, 0x00c, 0x010, 0x011, 0x011, 0x00e, 0x000, 0x000}},  // '3'
    {{0x000, 0x010, 0x018, 0x014, 0x014, 0x012, 0x03e, 0x010, 0x010, 0x000, 0x000}},  // '4'
    {{0x000, 0x01e, 0x000, 0x000, 0x00f, 0x011, 0x010, 0x011, 0x00e, 0x000, 0x000}},  // '5'
    {{0x000, 0x00e, 0x012, 0x001, 0x00d, 0x011, 0x011, 0x011, 0x00e, 0x000, 0x000}},  // '6'
    {{0x000, 0x01f, 0x010, 0x008, 0x008, 0x004, 0x004, 0x002, 0x002, 0x000, 0x000}},  // '7'
    {{0x000, 0x00e, 0x011, 0x011, 0x00e, 0x011, 0x011, 0x011, 0x00e, 0x000, 0x000}},  // '8'
    {{0x000, 0x00e, 0x011, 0x011, 0x011, 0x016, 0x010, 0x009, 0x00e, 0x000, 0x000}},  // '9'
    {{0x000, 0x000, 0x000, 0x001, 0x000, 0x000, 0x000, 0x000, 0x001, 0x000, 0x000}},  // ':'
    {{0x000, 0x000, 0x000, 0x001, 0x000, 0x000, 0x000, 0x001, 0x000, 0x000, 0x000}},  // ';'
    {{0x000, 0x000, 0x000, 0x000, 0x018, 0x006, 0x002, 0x008, 0x000, 0x000, 0x000}},  // '<'
    {{0x000, 0x000, 0x000, 0x000, 0x01e, 0x000, 0x01e, 0x000, 0x000, 0x000, 0x000}},  // '='
    {{0x000, 0x000, 0x000, 0x000, 0x006, 0x018, 0x010, 0x004, 0x000, 0x000, 0x000}},  // '>'
    {{0x000, 0x006, 0x009, 0x008, 0x008, 0x004, 0x004, 0x000, 0x004, 0x000, 0x000}},  // '?'
    {{0x000, 0x070, 0x08c, 0x174, 0x14a, 0x14a, 0x12a, 0x0d2, 0x004, 0x038, 0x000}},  // '@'
    {{0x000, 0x008, 0x00c, 0x014, 0x010, 0x01e, 0x022, 0x022, 0x021, 0x000, 0x000}},  // 'A'
    {{0x000, 0x01e, 0x022, 0x022, 0x002, 0x03e, 0x022, 0x022, 0x01e, 0x000, 0x000}},  // 'B'
    {{0x000, 0x01c, 0x022, 0x021, 0x001, 0x001, 0x021, 0x022, 0x01c, 0x000, 0x000}},  // 'C'
    {{0x000, 0x01e, 0x022, 0x042, 0x042, 0x042, 0x042, 0x022, 0x01e, 0x000, 0x000}},  // 'D'
    {{0x000, 0x01e, 0x002, 0x002, 0x002, 0x01e, 0x002, 0x002, 0x03e, 0x000, 0x000}},  // 'E'
    {{0x000, 0x01e, 0x002, 0x002, 0x002, 0x01e, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'F'
    {{0x000, 0x01c, 0x022, 0x021, 0x001, 0x031, 0x021, 0x022, 0x02e, 0x000, 0x000}},  // 'G'
    {{0x000, 0x042, 0x042, 0x042, 0x042, 0x07e, 0x042, 0x042, 0x042, 0x000, 0x000}},  // 'H'
    {{0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'I'
    {{0x000, 0x010, 0x010, 0x010, 0x010, 0x010, 0x012, 0x012, 0x00c, 0x000, 0x000}},  // 'J'
    {{0x000, 0x022, 0x012, 0x00a, 0x00a, 0x00e, 0x00a, 0x012, 0x022, 0x000, 0x000}},  // 'K'
    {{0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x03e, 0x000, 0x000}},  // 'L'
    {{0x000, 0x0c6, 0x0c6, 0x0c6, 0x082, 0x0aa, 0x0aa, 0x092, 0x092, 0x000, 0x000}},  // 'M'
    {{0x000, 0x046, 0x046, 0x04a, 0x04a, 0x052, 0x052, 0x062, 0x062, 0x000, 0x000}},  // 'N'
    {{0x000, 0x01c, 0x022, 0x041, 0x041, 0x041, 0x041, 0x022, 0x01c, 0x000, 0x000}},  // 'O'
    {{0x000, 0x01e, 0x022, 0x022, 0x022, 0x01e, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'P'
    {{0x000, 0x01c, 0x022, 0x041, 0x041, 0x041, 0x041, 0x022, 0x03c, 0x000, 0x000}},  // 'Q'
    {{0x000, 0x01e, 0x022, 0x022, 0x022, 0x01e, 0x002, 0x022, 0x022, 0x000, 0x000}},  // 'R'
    {{0x000, 0x01c, 0x022, 0x002, 0x00c, 0x030, 0x020, 0x022, 0x01c, 0x000, 0x000}},  // 'S'
    {{0x000, 0x03e, 0x008, 0x008, 0x008, 0x008, 0x008, 0x008, 0x008, 0x000, 0x000}},  // 'T'
    {{0x000, 0x022, 0x022, 0x022, 0x022, 0x022, 0x022, 0x022, 0x01c, 0x000, 0x000}},  // 'U'
    {{0x000, 0x021, 0x022, 0x022, 0x012, 0x014, 0x014, 0x00c, 0x008, 0x000, 0x000}},  // 'V'
    {{0x000, 0x131, 0x132, 0x132, 0x122, 0x00a, 0x0c8, 0x0cc, 0x0c4, 0x000, 0x000}},  // 'W'
    {{0x000, 0x022, 0x012, 0x014, 0x00c, 0x00c, 0x014, 0x012, 0x022, 0x000, 0x000}},  // 'X'
    {{0x000, 0x022, 0x022, 0x014, 0x01c, 0x008, 0x008, 0x008, 0x008, 0x000, 0x000}},  // 'Y'
    {{0x000, 0x03e, 0x020, 0x010, 0x008, 0x008, 0x004, 0x002, 0x03e, 0x000, 0x000}},  // 'Z'
    {{0x006, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x006, 0x000}},  // '['
    {{0x000, 0x001, 0x001, 0x000, 0x002, 0x002, 0x000, 0x000, 0x004, 0x000, 0x000}},  // 'backslash'
    {{0x003, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x003, 0x000}},  // ']'
    {{0x000, 0x000, 0x000, 0x00c, 0x008, 0x002, 0x012, 0x000, 0x000, 0x000, 0x000}},  // '^'
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x00e, 0x000}},  // '_'
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},  // '`'
    {{0x000, 0x000, 0x000, 0x006, 0x009, 0x00c, 0x009, 0x009, 0x00f, 0x000, 0x000}},  // 'a'
    {{0x000, 0x002, 0x002, 0x01e, 0x022, 0x022, 0x022, 0x022, 0x01e, 0x000, 0x000}},  // 'b'
    {{0x000, 0x000, 0x000, 0x00e, 0x011, 0x001, 0x001, 0x011, 0x00e, 0x000, 0x000}},  // 'c'
    {{0x000, 0x010, 0x010, 0x01e, 0x011, 0x011, 0x011, 0x011, 0x01e, 0x000, 0x000}},  // 'd'
    {{0x000, 0x000, 0x000, 0x00e, 0x011, 0x01f, 0x001, 0x011, 0x00e, 0x000, 0x000}},  // 'e'
    {{0x000, 0x002, 0x002, 0x006, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'f'
    {{0x000, 0x000, 0x000, 0x01e, 0x011, 0x011, 0x011, 0x011, 0x01e, 0x011, 0x00e}},  // 'g'
    {{0x000, 0x002, 0x002, 0x01e, 0x022, 0x022, 0x022, 0x022, 0x022, 0x000, 0x000}},  // 'h'
    {{0x000, 0x000, 0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'i'
    {{0x000, 0x000, 0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x003}},  // 'j'
    {{0x000, 0x002, 0x002, 0x012, 0x00a, 0x006, 0x00e, 0x00a, 0x012, 0x000, 0x000}},  // 'k'
    {{0x000, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'l'
    {{0x000, 0x000, 0x000, 0x06e, 0x092, 0x092, 0x092, 0x092, 0x092, 0x000, 0x000}},  // 'm'
    {{0x000, 0x000, 0x000, 0x01e, 0x022, 0x022, 0x022, 0x022, 0x022, 0x000, 0x000}},  // 'n'
    {{0x000, 0x000, 0x000, 0x00e, 0x011, 0x011, 0x011, 0x011, 0x00e, 0x000, 0x000}},  // 'o'
    {{0x000, 0x000, 0x000, 0x01e, 0x022, 0x022, 0x022, 0x022, 0x01e, 0x002, 0x002}},  // 'p'
    {{0x000, 0x000, 0x000, 0x01e, 0x011, 0x011, 0x011, 0x011, 0x01e, 0x010, 0x010}},  // 'q'
    {{0x000, 0x000, 0x000, 0x006, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000, 0x000}},  // 'r'
    {{0x000, 0x000, 0x000, 0x006, 0x009, 0x003, 0x00c, 0x009, 0x006, 0x000, 0x000}},  // 's'
    {{0x000, 0x000, 0x002, 0x007, 0x002, 0x002, 0x002, 0x002, 0x006, 0x000, 0x000}},  // 't'
    {{0x000, 0x000, 0x000, 0x022, 0x022, 0x022, 0x022, 0x022, 0x03c, 0x000, 0x000}},  // 'u'
    {{0x000, 0x000, 0x000, 0x011, 0x010, 0x00a, 0x00a, 0x00c, 0x004, 0x000, 0x000}},  // 'v'
    {{0x000, 0x000, 0x000, 0x099, 0x019, 0x05a, 0x052, 0x066, 0x024, 0x000, 0x000}},  // 'w'
    {{0x000, 0x000, 0x000, 0x009, 0x00a, 0x004, 0x004, 0x00a, 0x009, 0x000, 0x000}},  // 'x'
    {{0x000, 0x000, 0x000, 0x011, 0x010, 0x00a, 0x00a, 0x004, 0x004, 0x004, 0x002}},  // 'y'
    {{0x000, 0x000, 0x000, 0x01e, 0x010, 0x008, 0x004, 0x004, 0x01e, 0x000, 0x000}},  // 'z'
    {{0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000}},  // '{'
    {{0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002}},  // '|'
    {{0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x002, 0x000}},  // '}'
    {{0x000, 0x000, 0x000, 0x000, 0x000, 0x006, 0x01a, 0x000, 0x000, 0x000, 0x000}},  // '~'
}};

}  // namespace diffstr
