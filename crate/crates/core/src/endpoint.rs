use std::fmt;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A brick address: IPv4 as a u32 plus a port.
///
/// The derived order is lexicographic on `(ip, port)`; the restart
/// protocol's "next-highest" rule relies on it. Including the port keeps
/// the order total for desk-scale clusters running many bricks on one host.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(try_from = "String", into = "String")]
pub struct Endpoint {
    pub ip: u32,
    pub port: u16,
}

impl Endpoint {
    pub fn new(ip: u32, port: u16) -> Self {
        Endpoint { ip, port }
    }

    pub fn from_v4(addr: SocketAddrV4) -> Self {
        Endpoint {
            ip: u32::from(*addr.ip()),
            port: addr.port(),
        }
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::V4(SocketAddrV4::new(Ipv4Addr::from(self.ip), self.port))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", Ipv4Addr::from(self.ip), self.port)
    }
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid endpoint {0:?}: expected ip:port")]
pub struct EndpointParseError(pub String);

impl FromStr for Endpoint {
    type Err = EndpointParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, port) = s.rsplit_once(':').ok_or_else(|| EndpointParseError(s.into()))?;
        let ip: Ipv4Addr = ip.parse().map_err(|_| EndpointParseError(s.into()))?;
        let port: u16 = port.parse().map_err(|_| EndpointParseError(s.into()))?;
        Ok(Endpoint::new(u32::from(ip), port))
    }
}

impl TryFrom<String> for Endpoint {
    type Error = EndpointParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

/// Next endpoint after `after` in the total order, wrapping around to the
/// lowest when `after` is the highest. `candidates` need not be sorted.
/// Returns `None` when no candidate other than `after` exists.
pub fn next_highest(candidates: &[Endpoint], after: Endpoint) -> Option<Endpoint> {
    let mut sorted: Vec<Endpoint> = candidates.iter().copied().filter(|e| *e != after).collect();
    sorted.sort();
    sorted.dedup();
    if sorted.is_empty() {
        return None;
    }
    match sorted.iter().find(|e| **e > after) {
        Some(e) => Some(*e),
        None => Some(sorted[0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(last: u8, port: u16) -> Endpoint {
        Endpoint::new(u32::from(Ipv4Addr::new(10, 0, 0, last)), port)
    }

    #[test]
    fn parse_and_display_round_trip() {
        let e: Endpoint = "10.0.0.2:9000".parse().unwrap();
        assert_eq!(e, ep(2, 9000));
        assert_eq!(e.to_string(), "10.0.0.2:9000");
        assert!("10.0.0.2".parse::<Endpoint>().is_err());
    }

    #[test]
    fn order_is_ip_then_port() {
        assert!(ep(1, 9999) < ep(2, 1));
        assert!(ep(1, 9000) < ep(1, 9001));
    }

    #[test]
    fn next_highest_picks_successor() {
        let all = [ep(1, 9000), ep(2, 9000), ep(3, 9000)];
        assert_eq!(next_highest(&all, ep(2, 9000)), Some(ep(3, 9000)));
    }

    #[test]
    fn next_highest_wraps_around() {
        let all = [ep(1, 9000), ep(2, 9000), ep(3, 9000)];
        assert_eq!(next_highest(&all, ep(3, 9000)), Some(ep(1, 9000)));
    }

    #[test]
    fn next_highest_with_no_peers() {
        assert_eq!(next_highest(&[ep(1, 9000)], ep(1, 9000)), None);
        assert_eq!(next_highest(&[], ep(1, 9000)), None);
    }
}
