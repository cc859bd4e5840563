#![allow(dead_code)]

use std::collections::BTreeSet;

use cleantest::coverage::ScoreRequest;
use cleantest::{
    CallSite, CoverageScore, CoverageScorer, MethodSignature, NoiseLabel, ScoreSource, TypeName,
};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores every record with the same value.
pub struct FixedScorer(pub f64);

impl CoverageScorer for FixedScorer {
    fn score(&self, _: &ScoreRequest<'_>) -> cleantest::Result<CoverageScore> {
        Ok(CoverageScore::new(self.0, ScoreSource::Sidecar).expect("fixed score in range"))
    }
}

pub struct Exemplar {
    pub name: &'static str,
    pub focal: &'static str,
    pub test: &'static str,
    pub object_mode: bool,
    /// The category the exemplar illustrates.
    pub headline: NoiseLabel,
    /// Every label the rules assign to the pair.
    pub expected: &'static [NoiseLabel],
}

impl Exemplar {
    pub fn expected_set(&self) -> BTreeSet<NoiseLabel> {
        self.expected.iter().copied().collect()
    }
}

pub const OBJECT_CONCAT_FOCAL: &str =
    "public static Stream<Object> concat(Object... objects){\nreturn Stream.of(objects); }";
pub const SWAGGER_FOCAL: &str = "@ApiImplicitParams({@ApiImplicitParam(name=\"guild_id\", dataTypeClass=DiscordSnowflake.class, required=true, paramType=\"path\", type=\"string\", format=\"Discord snowflake\", value=\"Discord snowflake\"), @ApiImplicitParam(name=\"bot_id\", dataTypeClass=DiscordSnowflake.class, required=true, paramType=\"query\", type=\"string\", format=\"Discord snowflake\", value=\"Discord snowflake\")})\npublic Prefix getPrefixes(@PathVariable(\"guild_id\")DiscordSnowflake guildId, @RequestParam(\"bot_id\")DiscordSnowflake botId)\n{return Prefix.of(this.prefixRepo.fetch(new GuildBotId(guildId.longValue(), botId.longValue())));}";
pub const SWAGGER_STRIPPED: &str = "public Prefix getPrefixes(DiscordSnowflake guildId, DiscordSnowflake botId)\n{return Prefix.of(this.prefixRepo.fetch(new GuildBotId(guildId.longValue(), botId.longValue())));}";
pub const BOXER_FOCAL: &str = "public static <T> Boxer<T> from(T object){try {return new Boxer<>(object);}\ncatch(Exception ignored){}\nreturn null;}";
pub const I18N_FOCAL: &str = "private i18n () {}";
pub const I18N_TEST: &str = "@Test public void testI18N () { assertEquals(\"Wrong message returned by the messaging API!\", i18n.msg(\"test.msg.1\")); }";
pub const EXPOSE_FOCAL: &str = "@Override public CompletableFuture<Void> expose(ExposedThing thing) {...\nForm form = new Form.Builder().setHref(href).setContentType(contentType).setOp(Operation.READ_ALL_PROPERTIES,\nOperation.READ_MULTIPLE_PROPERTIES).build();\n...}";
pub const RESET_PASSWORD_FOCAL: &str = "public boolean resetPassword(Integer adminId, String password, String name) throws InvalidArgumentException {\n    if(StringUtils.isBlank(name))\n        throw new InvalidArgumentException(\"用户名不能空!\");\n    return true; }";
pub const SOUNDEX_FOCAL: &str = "@Override public double getWeight(String str1, String str2){ try{int diff= soundex.difference(str1,str2); return diff/MAX;} catch(Exception e){ LOG.warn(e.getMessage(),e); return 0;}}";
pub const SOUNDEX_TEST: &str = "@Test public void testGetWeight(){ SoundexMatcher soundexMatcher=new SoundexMatcher(); String a = \"John\"; String b = \"Jon\"; double matchingWeight=soundexMatcher.getMatchingWeight(a, b); assertEquals(1.0d, matchingWeight, EPSILON); a = \"n\"; b = \"Hulme\"; matchingWeight = soundexMatcher.getMatchingWeight(a, b); assertTrue(\"not same \"+a+\" and \"+b, 0.0d == matchingWeight);}";

/// The seven published exemplars. Elided bodies (`...`) are filled with a
/// minimal statement except in the syntax-error exemplar, where the elision
/// is what breaks the parse. Tests are written to call the focal method so
/// that only the illustrated category (plus any overlap the rules imply)
/// fires.
pub const EXEMPLARS: [Exemplar; 7] = [
    Exemplar {
        name: "ambiguous Object signature",
        focal: OBJECT_CONCAT_FOCAL,
        test: "@Test public void concatJoins() { Object a = new Object(); assertEquals(2, Streams.concat(a, new Object()).count()); }",
        object_mode: true,
        headline: NoiseLabel::AmbiguousDataType,
        expected: &[NoiseLabel::AmbiguousDataType],
    },
    Exemplar {
        name: "swagger annotations",
        focal: SWAGGER_FOCAL,
        test: "@Test public void prefixesForGuild() { DiscordSnowflake g = new DiscordSnowflake(1L); DiscordSnowflake b = new DiscordSnowflake(2L); assertNotNull(controller.getPrefixes(g, b)); }",
        object_mode: false,
        headline: NoiseLabel::UnnecessaryAnnotations,
        expected: &[NoiseLabel::UnnecessaryAnnotations],
    },
    Exemplar {
        name: "swallowed exception",
        focal: BOXER_FOCAL,
        test: "@Test public void fromWraps() { String s = \"x\"; assertNotNull(Boxer.from(s)); }",
        object_mode: false,
        headline: NoiseLabel::EmptyExceptionHandling,
        // the generic <T> also makes the signature ambiguous
        expected: &[NoiseLabel::AmbiguousDataType, NoiseLabel::EmptyExceptionHandling],
    },
    Exemplar {
        name: "empty constructor",
        focal: I18N_FOCAL,
        test: I18N_TEST,
        object_mode: false,
        headline: NoiseLabel::MissingImplementation,
        // the test exercises msg(), never the constructor
        expected: &[NoiseLabel::MissingImplementation, NoiseLabel::NoRelevance],
    },
    Exemplar {
        name: "broken builder chain",
        focal: EXPOSE_FOCAL,
        test: "@Test public void exposeThing() { ExposedThing thing = new ExposedThing(); assertNotNull(server.expose(thing)); }",
        object_mode: false,
        headline: NoiseLabel::SyntaxError,
        expected: &[NoiseLabel::UnnecessaryAnnotations, NoiseLabel::SyntaxError],
    },
    Exemplar {
        name: "chinese message",
        focal: RESET_PASSWORD_FOCAL,
        test: "@Test public void resetPasswordAcceptsName() { Integer id = 1; assertTrue(service.resetPassword(id, \"pw\", \"admin\")); }",
        object_mode: false,
        headline: NoiseLabel::NonEnglishLiteral,
        expected: &[NoiseLabel::NonEnglishLiteral],
    },
    Exemplar {
        name: "soundex mismatch",
        focal: SOUNDEX_FOCAL,
        test: SOUNDEX_TEST,
        object_mode: false,
        headline: NoiseLabel::NoRelevance,
        expected: &[NoiseLabel::UnnecessaryAnnotations, NoiseLabel::NoRelevance],
    },
];

pub fn json_record(id: &str, focal: &str, test: &str) -> String {
    serde_json::json!({"id": id, "focal_method": focal, "test_case": test}).to_string()
}

// ---------------------------------------------------------------------------
// Planted-noise corpus

/// Labels that can be planted independently of each other, except that an
/// empty body cannot also hold an empty catch.
pub const PLANTABLE: [NoiseLabel; 8] = NoiseLabel::ALL;

pub fn compatible(set: &BTreeSet<NoiseLabel>) -> bool {
    !(set.contains(&NoiseLabel::EmptyExceptionHandling)
        && set.contains(&NoiseLabel::MissingImplementation))
}

pub struct Planted {
    pub id: String,
    pub focal: String,
    pub test: String,
    pub labels: BTreeSet<NoiseLabel>,
    pub score: f64,
}

/// Renders one record carrying exactly `labels`.
pub fn plant(index: usize, labels: &BTreeSet<NoiseLabel>) -> Planted {
    use NoiseLabel::*;
    let name = format!("compute{index}");
    let generics = if labels.contains(&AmbiguousDataType) {
        "<T> "
    } else {
        ""
    };
    let annotation = if labels.contains(&UnnecessaryAnnotations) {
        "@Deprecated\n"
    } else {
        ""
    };
    let body = if labels.contains(&MissingImplementation) {
        "{ }".to_owned()
    } else {
        let mut lines = vec![];
        if labels.contains(&NonEnglishLiteral) {
            lines.push("log(\"計算\");");
        }
        if labels.contains(&EmptyExceptionHandling) {
            lines.push(
                "try {\n        validate(a, b);\n    } catch (ArithmeticException e) {\n    }",
            );
        }
        lines.push("return a + b;");
        format!("{{\n    {}\n}}", lines.join("\n    "))
    };
    let focal = format!("{annotation}public {generics}int {name}(int a, int b) {body}");

    let callee = if labels.contains(&NoRelevance) {
        format!("other{index}")
    } else {
        name
    };
    let mut test = format!("@Test\npublic void test{index}() {{\n    Calc calc = new Calc();\n    assertEquals(3, calc.{callee}(1, 2));\n");
    if labels.contains(&NonEnglishLiteral) && labels.contains(&MissingImplementation) {
        test.push_str("    assertNotNull(\"名前\");\n");
    }
    if labels.contains(&SyntaxError) {
        test.push_str("    int broken = ;\n");
    }
    test.push('}');

    Planted {
        id: format!("r{index:04}"),
        focal,
        test,
        labels: labels.clone(),
        score: if labels.contains(&LowCoverage) {
            0.0
        } else {
            0.9
        },
    }
}

/// `n` records: roughly a third clean, a third with one label, the rest with
/// two or three, and at least `min_pairs` carrying exactly two.
pub fn planted_corpus(seed: u64, n: usize, min_pairs: usize) -> Vec<Planted> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut pairs = 0;
    for i in 0..n {
        let want = if n - i <= min_pairs.saturating_sub(pairs) {
            2
        } else {
            *[0usize, 0, 1, 1, 2, 2, 3]
                .choose(&mut rng)
                .expect("non-empty")
        };
        let labels = loop {
            let set: BTreeSet<NoiseLabel> =
                PLANTABLE.choose_multiple(&mut rng, want).copied().collect();
            if compatible(&set) {
                break set;
            }
        };
        if labels.len() == 2 {
            pairs += 1;
        }
        out.push(plant(i, &labels));
    }
    out
}

// ---------------------------------------------------------------------------
// Relevance instances and the literal oracle

const NAMES: [&str; 3] = ["add", "put", "run"];
const TYPES: [&str; 12] = [
    "int",
    "long",
    "double",
    "Integer",
    "Double",
    "boolean",
    "Boolean",
    "char",
    "Character",
    "String",
    "Object",
    "int[]",
];

fn random_type(rng: &mut impl Rng) -> TypeName {
    TypeName::known(TYPES.choose(rng).expect("non-empty"))
}

pub fn random_signature(rng: &mut impl Rng) -> MethodSignature {
    let arity = rng.random_range(0..=4);
    let params = (0..arity)
        .map(|_| {
            if rng.random_bool(0.1) {
                TypeName::Unknown
            } else {
                random_type(rng)
            }
        })
        .collect();
    let varargs = arity > 0 && rng.random_bool(0.3);
    MethodSignature::new(*NAMES.choose(rng).expect("non-empty"), params, varargs)
}

pub fn random_calls(rng: &mut impl Rng) -> Vec<CallSite> {
    let count = rng.random_range(0..=5);
    (0..count)
        .map(|_| {
            let arity = rng.random_range(0..=6);
            let args = (0..arity)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        TypeName::Unknown
                    } else {
                        random_type(rng)
                    }
                })
                .collect();
            CallSite::new(*NAMES.choose(rng).expect("non-empty"), args)
        })
        .collect()
}

const NUMERIC: [&str; 12] = [
    "byte", "short", "int", "long", "float", "double", "Byte", "Short", "Integer", "Long", "Float",
    "Double",
];

fn oracle_compatible(param: &TypeName, arg: &TypeName) -> bool {
    let (Some(p), Some(a)) = (param.as_str(), arg.as_str()) else {
        return true;
    };
    p == a
        || (NUMERIC.contains(&p) && NUMERIC.contains(&a))
        || matches!(
            (p, a),
            ("boolean", "Boolean")
                | ("Boolean", "boolean")
                | ("char", "Character")
                | ("Character", "char")
        )
}

fn oracle_matches(sig: &MethodSignature, call: &CallSite) -> bool {
    if call.name != sig.name {
        return false;
    }
    let n = sig.params.len();
    if !sig.varargs {
        return call.args.len() == n
            && sig
                .params
                .iter()
                .zip(&call.args)
                .all(|(p, a)| oracle_compatible(p, a));
    }
    let fixed = n - 1;
    if call.args.len() < fixed {
        return false;
    }
    (0..call.args.len()).all(|i| {
        let param = if i < fixed {
            &sig.params[i]
        } else {
            &sig.params[fixed]
        };
        oracle_compatible(param, &call.args[i])
    })
}

/// Index of the first call that matches `sig`, checking every pairing.
pub fn relevance_oracle(sig: &MethodSignature, calls: &[CallSite]) -> Option<usize> {
    let hits: Vec<usize> = (0..calls.len())
        .filter(|&i| oracle_matches(sig, &calls[i]))
        .collect();
    hits.first().copied()
}

// ---------------------------------------------------------------------------
// Java member generators

const IDENTS: [&str; 10] = [
    "value", "count", "items", "result", "name", "index", "total", "buffer", "key", "node",
];
const MEMBER_TYPES: [&str; 9] = [
    "int",
    "long",
    "String",
    "boolean",
    "double",
    "List<String>",
    "Map<String, Integer>",
    "int[]",
    "Object",
];

fn ident(rng: &mut impl Rng) -> String {
    format!(
        "{}{}",
        IDENTS.choose(rng).expect("non-empty"),
        rng.random_range(0..50)
    )
}

fn ty(rng: &mut impl Rng) -> &'static str {
    MEMBER_TYPES.choose(rng).expect("non-empty")
}

fn expr(rng: &mut impl Rng, depth: u32) -> String {
    let pick = if depth == 0 {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..7)
    };
    match pick {
        0 => rng.random_range(0..1000).to_string(),
        1 => ident(rng),
        2 => format!("\"{}\"", ident(rng)),
        3 => format!("{}({})", ident(rng), expr(rng, depth - 1)),
        4 => format!("({} + {})", expr(rng, depth - 1), expr(rng, depth - 1)),
        5 => format!("new ArrayList<>({})", expr(rng, depth - 1)),
        _ => format!("(int) {}", expr(rng, depth - 1)),
    }
}

fn statement(rng: &mut impl Rng, depth: u32) -> String {
    let pick = if depth == 0 {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..7)
    };
    match pick {
        0 => format!("{} {} = {};", ty(rng), ident(rng), expr(rng, 2)),
        1 => format!("{}({});", ident(rng), expr(rng, 2)),
        2 => format!("{} = {};", ident(rng), expr(rng, 1)),
        3 => format!(
            "if ({} > {}) {{ {} }}",
            ident(rng),
            expr(rng, 1),
            statement(rng, depth - 1)
        ),
        4 => format!(
            "for (int i = 0; i < {}; i++) {{ {} }}",
            expr(rng, 1),
            statement(rng, depth - 1)
        ),
        5 => format!(
            "try {{ {} }} catch (Exception e) {{ {} }}",
            statement(rng, depth - 1),
            statement(rng, depth - 1)
        ),
        _ => format!("while ({}) {{ {} }}", ident(rng), statement(rng, depth - 1)),
    }
}

fn params(rng: &mut impl Rng) -> String {
    let n = rng.random_range(0..4);
    (0..n)
        .map(|_| format!("{} {}", ty(rng), ident(rng)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn block(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..5);
    let stmts: Vec<String> = (0..n).map(|_| statement(rng, 2)).collect();
    format!("{{\n    {}\n}}", stmts.join("\n    "))
}

/// A syntactically valid class member: method, constructor, field,
/// initializer block or nested class.
pub fn valid_member(rng: &mut impl Rng) -> String {
    match rng.random_range(0..6) {
        0 | 1 => format!(
            "public {} {}({}) {}",
            ty(rng),
            ident(rng),
            params(rng),
            block(rng)
        ),
        2 => format!("Widget({}) {}", params(rng), block(rng)),
        3 => format!("private {} {} = {};", ty(rng), ident(rng), expr(rng, 2)),
        4 => format!("static {}", block(rng)),
        _ => format!(
            "static class Inner{} {{ void {}() {} }}",
            rng.random_range(0..100),
            ident(rng),
            block(rng)
        ),
    }
}

/// Deletes one randomly chosen brace or parenthesis. The generators never
/// put these characters inside string literals.
pub fn corrupt(member: &str, rng: &mut impl Rng) -> String {
    let positions: Vec<usize> = member
        .char_indices()
        .filter(|(_, c)| matches!(c, '{' | '}' | '(' | ')'))
        .map(|(i, _)| i)
        .collect();
    let at = *positions.choose(rng).expect("member has brackets");
    let mut out = member.to_owned();
    out.remove(at);
    out
}

const ANNOTATIONS: [&str; 8] = [
    "@Override",
    "@Deprecated",
    "@Nullable",
    "@SuppressWarnings(\"unchecked\")",
    "@RequestMapping(value = \"/x\", method = GET)",
    "@ApiImplicitParams({@ApiImplicitParam(name = \"id\"), @ApiImplicitParam(name = \"q\")})",
    "@Timed(1000)",
    "@javax.annotation.Generated(\"gen\")",
];

fn annotation(rng: &mut impl Rng) -> &'static str {
    ANNOTATIONS.choose(rng).expect("non-empty")
}

fn sep(rng: &mut impl Rng) -> &'static str {
    [" ", "\n", "  ", "\t", " \n"]
        .choose(rng)
        .expect("non-empty")
}

/// A method with annotations on the declaration, among the modifiers, on
/// parameters and on local variables, separated by random whitespace.
pub fn annotated_method(rng: &mut impl Rng) -> String {
    let mut out = String::new();
    for _ in 0..rng.random_range(0..3) {
        out.push_str(annotation(rng));
        out.push_str(sep(rng));
    }
    out.push_str("public");
    out.push(' ');
    if rng.random_bool(0.3) {
        out.push_str(annotation(rng));
        out.push_str(sep(rng));
    }
    out.push_str(&format!("{} {}(", ty(rng), ident(rng)));
    let n = rng.random_range(0..4);
    let ps: Vec<String> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                format!("{}{}{} {}", annotation(rng), sep(rng), ty(rng), ident(rng))
            } else {
                format!("{} {}", ty(rng), ident(rng))
            }
        })
        .collect();
    out.push_str(&ps.join(", "));
    out.push_str(") {\n");
    for _ in 0..rng.random_range(1..4) {
        if rng.random_bool(0.3) {
            out.push_str(&format!("    {}{}", annotation(rng), sep(rng)));
            out.push_str(&format!("{} {} = {};\n", ty(rng), ident(rng), expr(rng, 1)));
        } else {
            out.push_str(&format!("    {}\n", statement(rng, 1)));
        }
    }
    out.push('}');
    out
}
