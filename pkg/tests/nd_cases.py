"""50 hand-labeled narration/dialogue fixtures.

Each case: (paragraph_text, [(span_text, label), ...]) where the span texts
concatenate back to the paragraph. Labels: "n" narration, "d" dialogue.
Derived by hand from the classification rules: guillemet content of trimmed
length >= 4 is dialogue (marks stay narration); shorter quoted regions stay
narration; a paragraph whose first non-space character is ¬ or — is dialogue
from the marker to the end; an unmatched « follows the same length rule on
its trailing content.
"""

N, D = "n", "d"

CASES = [
    # R1 basics
    ("Il dit « Bonjour madame » puis partit.",
     [("Il dit « ", N), ("Bonjour madame", D), (" » puis partit.", N)]),
    ("« Ah »", [("« Ah »", N)]),
    ("« Bonjour »", [("« ", N), ("Bonjour", D), (" »", N)]),
    ("Elle répondit « Non merci » et sortit.",
     [("Elle répondit « ", N), ("Non merci", D), (" » et sortit.", N)]),
    ("« Venez ici » cria-t-il.", [("« ", N), ("Venez ici", D), (" » cria-t-il.", N)]),
    ("Sans guillemets du tout.", [("Sans guillemets du tout.", N)]),
    ("", []),
    ("« Oui »", [("« Oui »", N)]),
    ("« Oui! »", [("« ", N), ("Oui!", D), (" »", N)]),
    ("A « Bcde » — C", [("A « ", N), ("Bcde", D), (" » — C", N)]),
    # multiple quotes
    ("« Un mot » et « encore un mot » ici.",
     [("« ", N), ("Un mot", D), (" » et « ", N), ("encore un mot", D), (" » ici.", N)]),
    ("« Ah » et « Bonjour tout le monde »",
     [("« Ah » et « ", N), ("Bonjour tout le monde", D), (" »", N)]),
    ("« Première phrase. » Puis « seconde phrase. »",
     [("« ", N), ("Première phrase.", D), (" » Puis « ", N), ("seconde phrase.", D), (" »", N)]),
    ("« abcd »« efgh »",
     [("« ", N), ("abcd", D), (" »« ", N), ("efgh", D), (" »", N)]),
    ("x « aa » y « bb » z", [("x « aa » y « bb » z", N)]),
    ("« aaaa » mid « bb » end", [("« ", N), ("aaaa", D), (" » mid « bb » end", N)]),
    # unbalanced opening mark
    ("Il dit « et rien ne vint.", [("Il dit « ", N), ("et rien ne vint.", D)]),
    ("Il dit « ", [("Il dit « ", N)]),
    ("« ab", [("« ab", N)]),
    ("« abcd", [("« ", N), ("abcd", D)]),
    ("Fin » seulement.", [("Fin » seulement.", N)]),
    # R2 dash paragraphs
    ("— Oui, bien sûr.", [("— Oui, bien sûr.", D)]),
    ("¬ Oui, bien sûr.", [("¬ Oui, bien sûr.", D)]),
    ("  — Avec espaces devant.", [("  ", N), ("— Avec espaces devant.", D)]),
    ("— Il dit « Bonjour madame » encore.",
     [("— Il dit « Bonjour madame » encore.", D)]),
    ("—Sans espace après.", [("—Sans espace après.", D)]),
    ("¬", [("¬", D)]),
    ("Texte — avec tiret au milieu.", [("Texte — avec tiret au milieu.", N)]),
    ("\t— Tabulation devant.", [("\t", N), ("— Tabulation devant.", D)]),
    # narration-only and embedded quotes
    ("La nuit tombait sur la ville.", [("La nuit tombait sur la ville.", N)]),
    ("Elle marchait vite, sans se retourner.",
     [("Elle marchait vite, sans se retourner.", N)]),
    ("Un silence. Puis un bruit.", [("Un silence. Puis un bruit.", N)]),
    ("Le « petit » chat dormait.", [("Le « ", N), ("petit", D), (" » chat dormait.", N)]),
    ("Il murmura « va-t-en » doucement.",
     [("Il murmura « ", N), ("va-t-en", D), (" » doucement.", N)]),
    ("« À demain » dit-elle.", [("« ", N), ("À demain", D), (" » dit-elle.", N)]),
    ("Rien à signaler ici, vraiment rien.",
     [("Rien à signaler ici, vraiment rien.", N)]),
    ("Page 42, chapitre IV.", [("Page 42, chapitre IV.", N)]),
    ("« a »", [("« a »", N)]),
    ("«» vide.", [("«» vide.", N)]),
    ("« mot ».", [("« mot ».", N)]),
    # whitespace and trim nuances
    ("«Bonjour»", [("«", N), ("Bonjour", D), ("»", N)]),
    ("«  Bonjour  »", [("«  ", N), ("Bonjour", D), ("  »", N)]),
    ("« salut à tous »", [("« ", N), ("salut à tous", D), (" »", N)]),
    ("Il dit «bonsoir» à tous.", [("Il dit «", N), ("bonsoir", D), ("» à tous.", N)]),
    ("   ", [("   ", N)]),
    ("Un. Deux. Trois.", [("Un. Deux. Trois.", N)]),
    # interactions
    ("« Oui » — murmura-t-il.", [("« Oui » — murmura-t-il.", N)]),
    ("« Oui oui » — murmura-t-il.",
     [("« ", N), ("Oui oui", D), (" » — murmura-t-il.", N)]),
    ("Début « milieu très long » puis « fin ».",
     [("Début « ", N), ("milieu très long", D), (" » puis « fin ».", N)]),
    ("— « Citation dans tiret »", [("— « Citation dans tiret »", D)]),
]

assert len(CASES) == 50
