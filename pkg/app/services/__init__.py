# Free-group words, automorphisms and translation-length services
