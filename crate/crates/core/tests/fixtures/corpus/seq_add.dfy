// Appending distinct elements to distinct sequences keeps them distinct.

lemma SeqAddInequality<T>(s1: seq<T>, t1: T, s2: seq<T>, t2: T)
requires s1 != s2 || t1 != t2
ensures s1 + [t1] != s2 + [t2]
{
  if s1 == s2 {
    assert t1 != t2;
    var len := |s1|;
    assert (s1 + [t1])[len] != (s2 + [t2])[len];
  } else if |s1| == |s2| {
    var i :| 0 <= i < |s1| && s1[i] != s2[i];
    assert (s1 + [t1])[i] != (s2 + [t2])[i];
  }
}
