//! Seeded generator of small forum corpora for tests and demos.
//!
//! Every category has its own title and phrase pools; shared filler phrases
//! keep the classes from being separable by length alone. Templates embed
//! structured entities (Luhn-valid card numbers, CVE ids, onion URLs, IPs,
//! emails, bitcoin addresses, hashes) so the entity tagger sees real input.
//! Every Hacking body carries a CVE id.

use super::{Category, ForumPost};
use crate::numerics::SeededRng;

const CARDING_TITLES: &[&str] = &[
    "Fresh dumps with pin",
    "Selling fullz and cvv",
    "Non vbv bins list",
    "Track 1 and 2 dumps shop",
    "Verified cc checker service",
    "Bulk cvv for cashout",
];

const CARDING_PHRASES: &[&str] = &[
    "valid card {card} with high balance",
    "cvv checked live {card}",
    "dumps come with track data and pin",
    "fullz include ssn dob and billing address",
    "cashout method works on any atm",
    "bins tested on major shops",
    "contact {email} for bulk cvv",
    "replacement if card is dead within an hour",
];

const NEWBIE_TITLES: &[&str] = &[
    "Hello everyone new here",
    "First post introduction",
    "How do I get started on this forum",
    "Greetings from a lurker",
    "Question about forum rules",
    "Where should a beginner read first",
];

const NEWBIE_PHRASES: &[&str] = &[
    "just joined and want to learn",
    "thanks for the warm welcome",
    "can someone point me to the rules thread",
    "i read the faq but still confused",
    "happy to be part of this community",
    "what is the best way to earn reputation",
    "found this place through {onion}",
    "sorry if this is the wrong section",
];

const SCAMMING_TITLES: &[&str] = &[
    "Easy money method guaranteed",
    "Refund method for big stores",
    "Paypal flip scheme explained",
    "Romance method that still pays",
    "Double your bitcoin today",
    "Fake escrow setup guide",
];

const SCAMMING_PHRASES: &[&str] = &[
    "send to {btc} and receive double",
    "victims never notice the refund",
    "fake invoices look exactly like the real ones",
    "social engineering script included",
    "escrow service at {onion} is ours",
    "guaranteed profit or your money back",
    "drop accounts ready for the transfer",
    "message {email} to buy the method",
];

const HACKING_TITLES: &[&str] = &[
    "Zero day exploit for sale",
    "Private rat fully undetectable",
    "Botnet access with panel",
    "Sql injection dump of shop database",
    "Ransomware builder leaked",
    "Remote code execution poc",
];

const HACKING_PHRASES: &[&str] = &[
    "payload bypasses antivirus and firewall",
    "c2 server running at {ip}",
    "crypter keeps the binary fud",
    "database dump includes password hash {hash}",
    "shell access to compromised servers",
    "keylogger module and credential stealer",
    "scan ranges from {ip} for open rdp",
    "exploit kit with privilege escalation",
];

const REVIEW_TITLES: &[&str] = &[
    "Vendor review after three orders",
    "Honest feedback on marketplace",
    "Review stealth shipping and packaging",
    "Five stars for this vendor",
    "Warning slow delivery review",
    "Rating the support team",
];

const REVIEW_PHRASES: &[&str] = &[
    "shipping took four days and stealth was good",
    "vendor answered messages quickly",
    "product matched the listing description",
    "would order again from this seller",
    "packaging was discreet and professional",
    "support resolved my issue politely",
    "market mirror {onion} was stable",
    "rating five out of five overall",
];

const SHARED_PHRASES: &[&str] = &[
    "pm me for details",
    "thanks in advance",
    "read the whole thread before asking",
    "posted this yesterday too",
    "any feedback is welcome",
];

const BASE58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
const BASE32_LOWER: &[u8] = b"abcdefghijklmnopqrstuvwxyz234567";
const HEX: &[u8] = b"0123456789abcdef";
const EMAIL_USERS: &[&str] = &["shadow", "darkvendor", "cc_king", "support", "anon"];
const EMAIL_DOMAINS: &[&str] = &["protonmail.com", "tutanota.com", "mail.ru", "cock.li"];

fn pools(category: Category) -> (&'static [&'static str], &'static [&'static str]) {
    match category {
        Category::Carding => (CARDING_TITLES, CARDING_PHRASES),
        Category::Newbie => (NEWBIE_TITLES, NEWBIE_PHRASES),
        Category::Scamming => (SCAMMING_TITLES, SCAMMING_PHRASES),
        Category::Hacking => (HACKING_TITLES, HACKING_PHRASES),
        Category::Review => (REVIEW_TITLES, REVIEW_PHRASES),
    }
}

/// Generates `n` posts whose categories cycle through [`Category::ALL`].
pub fn generate_synthetic_corpus(seed: u64, n: usize) -> Vec<ForumPost> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let category = Category::ALL[i % Category::ALL.len()];
            let (titles, phrases) = pools(category);
            let title = rng.choose(titles).to_string();
            let count = 2 + rng.next_below(2) as usize;
            let mut parts: Vec<String> = (0..count)
                .map(|_| fill(rng.choose(phrases), &mut rng))
                .collect();
            if category == Category::Hacking {
                parts.push(format!("affects {}", cve(&mut rng)));
            }
            if rng.next_below(2) == 0 {
                parts.push(rng.choose(SHARED_PHRASES).to_string());
            }
            ForumPost {
                id: format!("syn-{seed}-{i:06}"),
                category,
                title,
                body: parts.join(". "),
                timestamp: Some(timestamp(i)),
            }
        })
        .collect()
}

type Filler = fn(&mut SeededRng) -> String;

fn fill(template: &str, rng: &mut SeededRng) -> String {
    let mut out = template.to_string();
    let slots: [(&str, Filler); 6] = [
        ("{card}", card_number),
        ("{email}", email),
        ("{onion}", onion_url),
        ("{btc}", btc_address),
        ("{ip}", ipv4),
        ("{hash}", md5_like),
    ];
    for (slot, make) in slots {
        if out.contains(slot) {
            out = out.replace(slot, &make(rng));
        }
    }
    out
}

fn random_chars(rng: &mut SeededRng, alphabet: &[u8], len: usize) -> String {
    (0..len).map(|_| *rng.choose(alphabet) as char).collect()
}

/// 16-digit number starting with 4 whose last digit satisfies the Luhn check.
fn card_number(rng: &mut SeededRng) -> String {
    let mut digits: Vec<u32> = vec![4];
    digits.extend((0..14).map(|_| rng.next_below(10) as u32));
    digits.push(luhn_check_digit(&digits));
    let groups: Vec<String> = digits
        .chunks(4)
        .map(|c| {
            c.iter()
                .map(|d| char::from_digit(*d, 10).unwrap())
                .collect()
        })
        .collect();
    groups.join(" ")
}

pub(crate) fn luhn_check_digit(payload: &[u32]) -> u32 {
    // doubling starts from the rightmost payload digit
    let sum: u32 = payload
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 0 {
                let x = d * 2;
                if x > 9 {
                    x - 9
                } else {
                    x
                }
            } else {
                d
            }
        })
        .sum();
    (10 - sum % 10) % 10
}

fn cve(rng: &mut SeededRng) -> String {
    format!(
        "CVE-{}-{:04}",
        2014 + rng.next_below(8),
        1 + rng.next_below(9999)
    )
}

fn onion_url(rng: &mut SeededRng) -> String {
    format!(
        "http://{}.onion/market",
        random_chars(rng, BASE32_LOWER, 16)
    )
}

fn btc_address(rng: &mut SeededRng) -> String {
    format!("1{}", random_chars(rng, BASE58, 33))
}

fn ipv4(rng: &mut SeededRng) -> String {
    format!(
        "{}.{}.{}.{}",
        11 + rng.next_below(200),
        rng.next_below(256),
        rng.next_below(256),
        1 + rng.next_below(254)
    )
}

fn email(rng: &mut SeededRng) -> String {
    format!(
        "{}{}@{}",
        rng.choose(EMAIL_USERS),
        rng.next_below(100),
        rng.choose(EMAIL_DOMAINS)
    )
}

fn md5_like(rng: &mut SeededRng) -> String {
    // leading letter keeps the value clear of the bitcoin pattern
    format!(
        "{}{}",
        *rng.choose(b"abcdef") as char,
        random_chars(rng, HEX, 31)
    )
}

fn timestamp(i: usize) -> String {
    let hour = i % 24;
    let day = 1 + (i / 24) % 28;
    let month = 1 + (i / (24 * 28)) % 12;
    format!("2019-{month:02}-{day:02}T{hour:02}:00:00Z")
}
