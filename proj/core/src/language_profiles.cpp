#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace texmill::metadata::detail {

// Fixed stopword profiles for ten languages. Tokens are matched lowercase;
// non-ASCII entries are UTF-8 and matched byte-wise.
const std::unordered_map<std::string_view, std::vector<std::string_view>>& stopword_profiles() {
    static const std::unordered_map<std::string_view, std::vector<std::string_view>> kProfiles = {
        {"en",
         {"the", "of", "and", "to", "in", "a", "is", "that", "for", "it", "as", "was",
          "with", "be", "by", "on", "not", "this", "are", "we", "from", "or", "which",
          "an", "at", "have", "can", "has", "if", "then", "follows", "where", "let",
          "there", "their", "such", "these", "both", "each", "between"}},
        {"fr",
         {"le", "la", "les", "de", "des", "du", "et", "est", "en", "un", "une", "que",
          "qui", "dans", "pour", "sur", "par", "pas", "au", "aux", "ce", "cette", "se",
          "nous", "sont", "avec", "plus", "ou", "mais", "si", "donc", "suit", "comme",
          "tout", "être", "été", "donnée", "alors", "entre"}},
        {"de",
         {"der", "die", "das", "und", "ist", "in", "den", "von", "zu", "mit", "sich",
          "des", "auf", "für", "als", "auch", "es", "an", "werden", "aus", "er", "hat",
          "dass", "sie", "nach", "wird", "bei", "einer", "ein", "eine", "um", "noch",
          "wie", "einem", "über", "so", "zum", "nicht", "dann"}},
        {"es",
         {"el", "la", "de", "que", "y", "en", "los", "del", "se", "las", "por", "un",
          "para", "con", "una", "su", "al", "lo", "como", "más", "pero", "sus", "le",
          "ya", "o", "este", "sí", "porque", "esta", "entre", "cuando", "muy", "sobre",
          "también", "hasta", "donde", "quien", "desde", "nos"}},
        {"it",
         {"il", "di", "che", "e", "la", "per", "un", "in", "una", "sono", "mi", "si",
          "lo", "ma", "ha", "le", "non", "con", "come", "se", "della", "nel", "dei",
          "alla", "questo", "questa", "quindi", "anche", "del", "da", "più", "gli",
          "al", "dove", "essere", "tra", "ogni", "dalla", "sia"}},
        {"pt",
         {"o", "a", "de", "que", "e", "do", "da", "em", "um", "para", "é", "com",
          "não", "uma", "os", "no", "se", "na", "por", "mais", "as", "dos", "como",
          "mas", "foi", "ao", "ele", "das", "tem", "à", "seu", "sua", "ou", "ser",
          "quando", "muito", "há", "nos", "já"}},
        {"nl",
         {"de", "het", "een", "en", "van", "ik", "te", "dat", "die", "in", "is",
          "zijn", "niet", "op", "aan", "met", "als", "voor", "er", "maar", "om",
          "hij", "dan", "zou", "of", "wat", "mijn", "men", "dit", "zo", "door",
          "over", "ze", "uit", "ook", "tot", "je", "bij", "naar"}},
        {"pl",
         {"w", "i", "z", "na", "do", "to", "że", "się", "nie", "jest", "o", "jak",
          "po", "co", "tak", "za", "od", "przez", "ale", "przy", "czy", "tego", "dla",
          "jego", "być", "może", "już", "tylko", "są", "lub", "oraz", "który", "która",
          "które", "więc", "bardzo", "gdzie", "kiedy", "ten"}},
        {"ru",
         {"и", "в", "не", "на", "я", "что", "он", "с", "как", "это", "по", "но",
          "из", "у", "за", "то", "а", "его", "же", "от", "так", "для", "мы", "она",
          "к", "или", "если", "есть", "был", "при", "до", "также", "где", "когда",
          "все", "быть", "может", "этого", "чтобы"}},
        {"sv",
         {"och", "i", "att", "det", "som", "en", "på", "är", "av", "för", "med",
          "till", "den", "har", "de", "inte", "om", "ett", "han", "men", "var",
          "jag", "sig", "från", "vi", "så", "kan", "när", "efter", "vid", "också",
          "där", "eller", "under", "än", "detta", "alla", "sin", "mellan"}},
    };
    return kProfiles;
}

}  // namespace texmill::metadata::detail
