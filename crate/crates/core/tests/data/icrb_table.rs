// Reference ICRB curves in dB at p = 10, sampled every ten batches.

pub const ICRB_N20_DB: [(usize, f64); 100] = [
    (1, -2.2548303427145),
    (11, -12.6687571942968),
    (21, -15.4770232900537),
    (31, -17.1684472810572),
    (41, -18.3826689099119),
    (51, -19.3305321036939),
    (61, -20.1081286928222),
    (71, -20.7674138299053),
    (81, -21.339680531501),
    (91, -21.8452442659254),
    (101, -22.2980440805409),
    (111, -22.7080601305811),
    (121, -23.082684045879),
    (131, -23.4275432992721),
    (141, -23.7470214692683),
    (151, -24.0445998156462),
    (161, -24.323089103033),
    (171, -24.584791446636),
    (181, -24.8316160914063),
    (191, -25.0651640151918),
    (201, -25.2867909169194),
    (211, -25.4976548956914),
    (221, -25.6987530795656),
    (231, -25.8909501416359),
    (241, -26.0750007684632),
    (251, -26.2515675575249),
    (261, -26.4212354160973),
    (271, -26.5845232514586),
    (281, -26.7418935417653),
    (291, -26.8937602325736),
    (301, -27.0404952986529),
    (311, -27.1824342329829),
    (321, -27.3198806667632),
    (331, -27.4531102804717),
    (341, -27.5823741326395),
    (351, -27.7079015073727),
    (361, -27.8299023617711),
    (371, -27.948569438865),
    (381, -28.0640800994707),
    (391, -28.1765979166732),
    (401, -28.2862740689163),
    (411, -28.3932485614752),
    (421, -28.4976513010712),
    (431, -28.5996030443218),
    (441, -28.6992162373929),
    (451, -28.7965957614941),
    (461, -28.891839596611),
    (471, -28.9850394140035),
    (481, -29.0762811064528),
    (491, -29.1656452639442),
    (501, -29.253207601387),
    (511, -29.3390393440616),
    (521, -29.4232075757098),
    (531, -29.5057755535292),
    (541, -29.5868029937802),
    (551, -29.6663463312324),
    (561, -29.7444589552761),
    (571, -29.821191425173),
    (581, -29.8965916666178),
    (591, -29.9707051515271),
    (601, -30.0435750627419),
    (611, -30.11524244514),
    (621, -30.1857463444803),
    (631, -30.2551239351559),
    (641, -30.3234106379027),
    (651, -30.3906402283964),
    (661, -30.4568449375709),
    (671, -30.5220555444044),
    (681, -30.5863014618424),
    (691, -30.6496108164565),
    (701, -30.7120105223811),
    (711, -30.7735263500122),
    (721, -30.8341829899088),
    (731, -30.8940041122931),
    (741, -30.9530124225078),
    (751, -31.0112297127562),
    (761, -31.0686769104202),
    (771, -31.1253741232241),
    (781, -31.1813406814875),
    (791, -31.2365951776913),
    (801, -31.2911555035569),
    (811, -31.3450388848261),
    (821, -31.3982619139089),
    (831, -31.4508405805556),
    (841, -31.5027903006936),
    (851, -31.5541259435604),
    (861, -31.6048618572511),
    (871, -31.6550118927911),
    (881, -31.704589426835),
    (891, -31.7536073830832),
    (901, -31.8020782525051),
    (911, -31.8500141124445),
    (921, -31.897426644683),
    (931, -31.9443271525279),
    (941, -31.9907265769871),
    (951, -32.0366355120886),
    (961, -32.0820642194),
    (971, -32.1270226417946),
    (981, -32.171520416514),
    (991, -32.2155668875673),
];

pub const ICRB_N50_DB: [(usize, f64); 100] = [
    (1, -5.25783735923745),
    (11, -15.6717642108197),
    (21, -18.4800303065766),
    (31, -20.1714542975802),
    (41, -21.3856759264348),
    (51, -22.3335391202168),
    (61, -23.1111357093451),
    (71, -23.7704208464282),
    (81, -24.3426875480239),
    (91, -24.8482512824484),
    (101, -25.3010510970639),
    (111, -25.711067147104),
    (121, -26.0856910624019),
    (131, -26.4305503157951),
    (141, -26.7500284857912),
    (151, -27.0476068321691),
    (161, -27.3260961195559),
    (171, -27.587798463159),
    (181, -27.8346231079293),
    (191, -28.0681710317147),
    (201, -28.2897979334423),
    (211, -28.5006619122144),
    (221, -28.7017600960886),
    (231, -28.8939571581589),
    (241, -29.0780077849861),
    (251, -29.2545745740478),
    (261, -29.4242424326203),
    (271, -29.5875302679815),
    (281, -29.7449005582882),
    (291, -29.8967672490965),
    (301, -30.0435023151759),
    (311, -30.1854412495058),
    (321, -30.3228876832862),
    (331, -30.4561172969946),
    (341, -30.5853811491624),
    (351, -30.7109085238957),
    (361, -30.832909378294),
    (371, -30.9515764553879),
    (381, -31.0670871159936),
    (391, -31.1796049331961),
    (401, -31.2892810854393),
    (411, -31.3962555779981),
    (421, -31.5006583175941),
    (431, -31.6026100608448),
    (441, -31.7022232539158),
    (451, -31.7996027780171),
    (461, -31.8948466131339),
    (471, -31.9880464305264),
    (481, -32.0792881229758),
    (491, -32.1686522804671),
    (501, -32.2562146179099),
    (511, -32.3420463605846),
    (521, -32.4262145922327),
    (531, -32.5087825700521),
    (541, -32.5898100103031),
    (551, -32.6693533477553),
    (561, -32.7474659717991),
    (571, -32.8241984416959),
    (581, -32.8995986831408),
    (591, -32.97371216805),
    (601, -33.0465820792648),
    (611, -33.118249461663),
    (621, -33.1887533610033),
    (631, -33.2581309516788),
    (641, -33.3264176544256),
    (651, -33.3936472449194),
    (661, -33.4598519540939),
    (671, -33.5250625609274),
    (681, -33.5893084783653),
    (691, -33.6526178329794),
    (701, -33.715017538904),
    (711, -33.7765333665351),
    (721, -33.8371900064317),
    (731, -33.897011128816),
    (741, -33.9560194390307),
    (751, -34.0142367292791),
    (761, -34.0716839269432),
    (771, -34.128381139747),
    (781, -34.1843476980104),
    (791, -34.2396021942142),
    (801, -34.2941625200798),
    (811, -34.348045901349),
    (821, -34.4012689304319),
    (831, -34.4538475970786),
    (841, -34.5057973172166),
    (851, -34.5571329600833),
    (861, -34.607868873774),
    (871, -34.6580189093141),
    (881, -34.7075964433579),
    (891, -34.7566143996062),
    (901, -34.8050852690281),
    (911, -34.8530211289674),
    (921, -34.9004336612059),
    (931, -34.9473341690509),
    (941, -34.99373359351),
    (951, -35.0396425286116),
    (961, -35.0850712359229),
    (971, -35.1300296583175),
    (981, -35.1745274330369),
    (991, -35.2185739040902),
];
