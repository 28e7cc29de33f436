// Set-union cardinality, proved by induction on the second set.

lemma LemmaUnionSize<X>(xs: set<X>, ys: set<X>)
    ensures |xs + ys| >= |xs|
    ensures |xs + ys| >= |ys|
{
    if ys == {} {
    } else {
        var y :| y in ys;
        if y in xs {
            var xr := xs - {y};
            var yr := ys - {y};
            LemmaUnionSize(xr, yr);
            assert xr + yr == xs + ys - {y};
        } else {
            var xr := xs - {y};
            var yr := ys - {y};
            LemmaUnionSize(xr, yr);
        }
    }
}
