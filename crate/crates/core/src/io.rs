//! Order-log CSV ingestion and emission.

use std::io::{Read, Write};
use std::str::FromStr;

use crate::book::{OrderEvent, OrderId};
use crate::error::ParseError;
use crate::grid::Price;

pub const EVENT_HEADER: &str = "timestamp_us,order_id,action,side,order_type,price,qty,latency_flag,account_type";

fn field<T>(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T, ParseError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|e| ParseError::Row {
        line,
        message: format!("{name}: {e}"),
    })
}

/// Reads an order log. Errors carry the 1-based line of the offending row.
pub fn read_events<R: Read>(input: R) -> Result<Vec<OrderEvent>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != EVENT_HEADER {
        return Err(ParseError::Header {
            expected: EVENT_HEADER.to_string(),
            found: header,
        });
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => ParseError::Row {
                line: pos.line(),
                message: e.to_string(),
            },
            None => ParseError::Csv(e),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 9 {
            return Err(ParseError::Row {
                line,
                message: format!("expected 9 fields, found {}", record.len()),
            });
        }
        let price_raw = record.get(5).unwrap_or("");
        let price = if price_raw.is_empty() {
            None
        } else {
            Some(field::<Price>(&record, 5, "price", line)?)
        };
        let order_id = record.get(1).unwrap_or("");
        if order_id.is_empty() {
            return Err(ParseError::Row {
                line,
                message: "order_id: empty".to_string(),
            });
        }
        events.push(OrderEvent {
            timestamp_us: field(&record, 0, "timestamp_us", line)?,
            order_id: OrderId(order_id.to_string()),
            action: field(&record, 2, "action", line)?,
            side: field(&record, 3, "side", line)?,
            order_type: field(&record, 4, "order_type", line)?,
            price,
            quantity: field(&record, 6, "qty", line)?,
            latency: field(&record, 7, "latency_flag", line)?,
            account: field(&record, 8, "account_type", line)?,
        });
    }
    Ok(events)
}

pub fn write_events<W: Write>(mut out: W, events: &[OrderEvent]) -> std::io::Result<()> {
    writeln!(out, "{EVENT_HEADER}")?;
    for e in events {
        let price = e.price.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.timestamp_us, e.order_id, e.action, e.side, e.order_type, price, e.quantity, e.latency, e.account
        )?;
    }
    Ok(())
}
