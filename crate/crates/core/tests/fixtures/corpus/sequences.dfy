// Sequence and set lemmas in the style of a standard library. Every lemma
// carries exactly the hint assertion its proof needs; the example bank is
// mined from these.

function ToSet<T>(xs: seq<T>): set<T>
{
  set x: T | x in xs
}

function DropLast<T>(xs: seq<T>): seq<T>
  requires |xs| > 0
{
  xs[..|xs|-1]
}

function Last<T>(xs: seq<T>): T
  requires |xs| > 0
{
  xs[|xs|-1]
}

ghost predicate HasNoDuplicates<T>(xs: seq<T>)
{
  forall i, j :: 0 <= i < j < |xs| ==> xs[i] != xs[j]
}

function Max(xs: seq<int>): int
  requires 0 < |xs|
{
  if |xs| == 1 then xs[0]
  else if xs[0] >= Max(xs[1..]) then xs[0]
  else Max(xs[1..])
}

function Min(xs: seq<int>): int
  requires 0 < |xs|
{
  if |xs| == 1 then xs[0]
  else if xs[0] <= Min(xs[1..]) then xs[0]
  else Min(xs[1..])
}

function FlattenReverse<T>(xs: seq<seq<T>>): seq<T>
{
  if |xs| == 0 then []
  else FlattenReverse(DropLast(xs)) + Last(xs)
}

function FoldLeft<A, B>(f: (B, A) -> B, b: B, xs: seq<A>): B
{
  if |xs| == 0 then b
  else FoldLeft(f, f(b, xs[0]), xs[1..])
}

ghost predicate InvFoldLeft<A(!new), B(!new)>(inv: (B, seq<A>) -> bool, stp: (B, A, B) -> bool)
{
  forall x: A, xs: seq<A>, b: B, b': B ::
    inv(b, [x] + xs) && stp(b, x, b') ==> inv(b', xs)
}

lemma LemmaMaxOfConcat(xs: seq<int>, ys: seq<int>)
  requires 0 < |xs| && 0 < |ys|
  ensures Max(xs+ys) >= Max(xs)
  ensures Max(xs+ys) >= Max(ys)
  ensures forall i {:trigger i in [Max(xs + ys)]} :: i in xs + ys ==> Max(xs + ys) >= i
{
  if |xs| == 1 {
  } else {
    assert xs[1..] + ys == (xs + ys)[1..];
    LemmaMaxOfConcat(xs[1..], ys);
  }
}

lemma LemmaCardinalityOfSet<T>(xs: seq<T>)
  ensures |ToSet(xs)| <= |xs|
{
  if |xs| == 0 {
  } else {
    assert ToSet(xs) == ToSet(DropLast(xs)) + {Last(xs)};
    LemmaCardinalityOfSet(DropLast(xs));
  }
}

lemma LemmaFlattenLengthLeMul<T>(xs: seq<seq<T>>, j: int)
  requires forall i | 0 <= i < |xs| :: |xs[i]| <= j
  ensures |FlattenReverse(xs)| <= |xs| * j
{
  if |xs| == 0 {
  } else {
    LemmaFlattenLengthLeMul(xs[..|xs|-1], j);
    assert |FlattenReverse(xs[..|xs|-1])| <= (|xs|-1) * j;
  }
}

lemma LemmaCardinalityOfSetNoDuplicates<T>(xs: seq<T>)
  requires HasNoDuplicates(xs)
  ensures |ToSet(xs)| == |xs|
{
  if |xs| == 0 {
  } else {
    LemmaCardinalityOfSetNoDuplicates(DropLast(xs));
    assert ToSet(xs) == ToSet(DropLast(xs)) + {Last(xs)};
  }
}

lemma LemmaCardinalityOfEmptySetIs0<T>(xs: seq<T>)
  ensures |ToSet(xs)| == 0 <==> |xs| == 0
{
  if |xs| != 0 {
    assert xs[0] in ToSet(xs);
  }
}

lemma LemmaInvFoldLeft<A(!new), B(!new)>(inv: (B, seq<A>) -> bool,
                                         stp: (B, A, B) -> bool,
                                         f: (B, A) -> B,
                                         b: B,
                                         xs: seq<A>)
  requires InvFoldLeft(inv, stp)
  requires forall b, a :: stp(b, a, f(b, a))
  requires inv(b, xs)
  ensures inv(FoldLeft(f, b, xs), [])
{
  if xs == [] {
  } else {
    assert [xs[0]] + xs[1..] == xs;
    LemmaInvFoldLeft(inv, stp, f, f(b, xs[0]), xs[1..]);
  }
}

lemma LemmaMinOfConcat(xs: seq<int>, ys: seq<int>)
  requires 0 < |xs| && 0 < |ys|
  ensures Min(xs+ys) <= Min(xs)
  ensures Min(xs+ys) <= Min(ys)
  ensures forall i :: i in xs + ys ==> Min(xs + ys) <= i
{
  if |xs| == 1 {
  } else {
    assert xs[1..] + ys == (xs + ys)[1..];
    LemmaMinOfConcat(xs[1..], ys);
  }
}
