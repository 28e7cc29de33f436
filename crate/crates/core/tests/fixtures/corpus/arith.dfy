// Straight-line nonlinear arithmetic lemmas.

lemma LemmaMulInequality(x: int, y: int, z: int)
  requires x <= y
  requires 0 <= z
  ensures x * z <= y * z
{
  assert 0 <= (y - x) * z;
}

lemma LemmaMulStrictlyPositive(x: int, y: int)
  requires 0 < x && 0 < y
  ensures 0 < x * y
{
  assert x * y == (x - 1) * y + y;
}

lemma LemmaAddMonotonic(a: int, b: int, c: int)
  requires a <= b
  ensures a + c <= b + c
{
  assert a + c - (b + c) == a - b;
}
