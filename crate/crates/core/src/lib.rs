//! Resource quantifiers of quantum states and measurement sets, and the
//! subchannel discrimination and exclusion games built from their witnesses.

pub mod conic;
pub mod games;
pub mod gpt;
pub mod json;
pub mod linalg;
pub mod objects;
pub mod resources;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/conic.md")]
    struct Conic;
    #[doc = include_str!("../../../book/src/objects.md")]
    struct Objects;
    #[doc = include_str!("../../../book/src/quantifiers.md")]
    struct Quantifiers;
    #[doc = include_str!("../../../book/src/games.md")]
    struct Games;
    #[doc = include_str!("../../../book/src/gpt.md")]
    struct Gpt;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
