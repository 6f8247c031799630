# Tests for w1-perfsan
