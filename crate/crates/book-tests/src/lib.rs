//! Compiles and runs the Rust listings of the guide as doctests.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[cfg(doctest)]
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        )*
    };
}

chapters! {
    Introduction => "introduction.md",
    Data => "data.md",
    Hierarchy => "hierarchy.md",
    HgeLayer => "hge-layer.md",
    Baselines => "baselines.md",
    Training => "training.md",
    Evaluation => "evaluation.md",
    Cli => "cli.md",
    Datasets => "datasets.md",
}
